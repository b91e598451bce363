#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "kiru/chartype.hpp"
#include "kiru/corpus.hpp"

namespace kiru {

// N-gram ids ending at one position. Index 0 holds the unigram [t], 1 the
// bigram [t-1:t], 2 the trigram [t-2:t].
struct NgramIds {
  std::array<std::int32_t, kMaxOrder> chars{};
  std::array<std::int32_t, kMaxOrder> types{};

  friend bool operator==(const NgramIds&, const NgramIds&) = default;
};

NgramIds extract_ngram_ids(const Sentence& sentence, std::size_t t,
                           const Vocabulary& vocab);

// extract_ngram_ids for every position of the sentence.
std::vector<NgramIds> sentence_ngram_ids(const Sentence& sentence,
                                         const Vocabulary& vocab);

// One NgramIds per window offset, left to right. Offsets that fall before the
// sentence carry the reserved BOS id everywhere, offsets past it the EOS id.
struct PositionFeatures {
  std::vector<NgramIds> window;

  std::size_t id_count() const { return window.size() * 2 * kMaxOrder; }
};

PositionFeatures assemble_window(const Sentence& sentence, std::size_t t,
                                 const Vocabulary& vocab, std::size_t window);

// Same as assemble_window, over precomputed per-position ids.
PositionFeatures assemble_window(const std::vector<NgramIds>& ids,
                                 std::size_t t, std::size_t window);

void check_window(std::size_t window);

// Sparse dictionary features for the boundary between t-1 and t, laid out as
// [L1..Lm, R1..Rm, I2..Im] with m = max_len. Word lengths above m count as m.
//   L_k: a dictionary word of clipped length k ends at t-1
//   R_k: a dictionary word of clipped length k starts at t
//   I_k: a dictionary word of clipped length k covers both t-1 and t
class DictVector {
 public:
  explicit DictVector(std::size_t max_len = SegDictionary::kDefaultMaxLen)
      : max_len_(max_len), bits_(width(max_len), 0) {}

  static std::size_t width(std::size_t max_len) { return 3 * max_len - 1; }

  std::size_t size() const { return bits_.size(); }
  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  std::uint8_t left(std::size_t k) const { return bits_[k - 1]; }
  std::uint8_t right(std::size_t k) const { return bits_[max_len_ + k - 1]; }
  std::uint8_t inside(std::size_t k) const {
    return bits_[2 * max_len_ + k - 2];
  }

  void set_left(std::size_t len) { bits_[clip(len) - 1] = 1; }
  void set_right(std::size_t len) { bits_[max_len_ + clip(len) - 1] = 1; }
  void set_inside(std::size_t len) { bits_[2 * max_len_ + clip(len) - 2] = 1; }

  friend bool operator==(const DictVector&, const DictVector&) = default;

 private:
  std::size_t clip(std::size_t len) const {
    return len < max_len_ ? len : max_len_;
  }

  std::size_t max_len_;
  std::vector<std::uint8_t> bits_;
};

DictVector dictionary_vector(const Sentence& sentence, std::size_t t,
                             const SegDictionary& dict);

// dictionary_vector for every position, sharing one scan of the sentence.
std::vector<DictVector> dictionary_vectors(const Sentence& sentence,
                                           const SegDictionary& dict);

}  // namespace kiru
