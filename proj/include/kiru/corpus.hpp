#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kiru/chartype.hpp"

namespace kiru {

// Half-open [begin, end) character range of one word.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const Span&, const Span&) = default;
};

struct Sentence {
  std::u32string chars;
  std::optional<std::vector<Span>> spans;
  std::optional<std::string> domain;

  std::size_t size() const { return chars.size(); }
};

// True iff spans are sorted, contiguous, non-empty and cover [0, length).
bool is_valid_partition(const std::vector<Span>& spans, std::size_t length);

// ---------------------------------------------------------------------------
// Labels

enum class Label : std::uint8_t { kB = 0, kI = 1, kE = 2, kS = 3 };

enum class LabelScheme : std::uint8_t { kBIES, kBIE, kBI };

using LabelSequence = std::vector<Label>;

std::size_t label_count(LabelScheme scheme);
// Labels of `scheme` in index order; the index is the model's output unit.
std::vector<Label> scheme_labels(LabelScheme scheme);
char label_char(Label label);
std::string_view scheme_name(LabelScheme scheme);
LabelScheme parse_scheme(std::string_view name);

LabelSequence encode_labels(const Sentence& sentence, LabelScheme scheme);

// ---------------------------------------------------------------------------
// Corpus I/O. One sentence per line, words separated by a single ASCII space.

Sentence parse_segmented_line(std::string_view line, std::size_t line_no);
std::vector<Sentence> read_segmented(std::istream& in);
std::vector<Sentence> read_segmented_corpus(const std::filesystem::path& path);

// Reads every regular file in `dir` (sorted by name) and tags its sentences
// with the file stem as domain.
std::vector<Sentence> read_domain_corpus(const std::filesystem::path& dir);

std::string format_segmented(const Sentence& sentence);
void write_segmented(std::ostream& out, const std::vector<Sentence>& corpus);

// Words of a segmented sentence, as UTF-8.
std::vector<std::string> sentence_words(const Sentence& sentence);

// ---------------------------------------------------------------------------
// Vocabulary

enum class Stream : std::uint8_t { kChar = 0, kCharType = 1 };

inline constexpr int kMaxOrder = 3;

// Per stream and n-gram order, a map from n-gram to a dense id. Ids 0..2 are
// reserved; the rest follow the lexicographic order of the keys.
class Vocabulary {
 public:
  static constexpr std::int32_t kUnk = 0;
  static constexpr std::int32_t kBos = 1;
  static constexpr std::int32_t kEos = 2;
  static constexpr std::int32_t kReserved = 3;

  Vocabulary() = default;

  // `keys` must be sorted and unique for each table.
  static Vocabulary from_keys(
      std::array<std::vector<std::u32string>, 2 * kMaxOrder> keys,
      std::size_t min_count);

  std::int32_t lookup(Stream stream, int order, std::u32string_view key) const;
  std::size_t size(Stream stream, int order) const;
  // Keys in id order, excluding reserved ids.
  const std::vector<std::u32string>& keys(Stream stream, int order) const;
  std::size_t min_count() const { return min_count_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.min_count_ == b.min_count_ && a.keys_ == b.keys_;
  }

 private:
  static std::size_t index(Stream stream, int order);
  void reindex();

  std::array<std::vector<std::u32string>, 2 * kMaxOrder> keys_;
  std::array<std::unordered_map<std::u32string, std::int32_t>, 2 * kMaxOrder>
      ids_;
  std::size_t min_count_ = 1;
};

// Character-type string of a character sequence (one CharType per char,
// stored as char32_t).
std::u32string char_type_string(std::u32string_view chars);

Vocabulary build_vocabulary(const std::vector<Sentence>& corpus,
                            std::size_t min_count = 1);

// ---------------------------------------------------------------------------
// Dictionary

class SegDictionary {
 public:
  static constexpr std::size_t kDefaultMaxLen = 4;

  explicit SegDictionary(std::size_t max_len = kDefaultMaxLen);

  // Empty words are ignored.
  void insert(std::u32string_view word);
  bool contains(std::u32string_view word) const;

  // Calls `hit(length)` for every dictionary word that equals
  // chars[start, start + length).
  template <class F>
  void for_each_match(std::u32string_view chars, std::size_t start,
                      F&& hit) const {
    std::uint32_t node = 0;
    for (std::size_t i = start; i < chars.size(); ++i) {
      node = child(node, chars[i]);
      if (node == kNone) return;
      if (nodes_[node].terminal) hit(i - start + 1);
    }
  }

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  std::size_t max_len() const { return max_len_; }
  // Longest stored word, in characters.
  std::size_t longest() const { return longest_; }
  // Sorted by code point.
  std::vector<std::u32string> words() const;

 private:
  static constexpr std::uint32_t kNone = 0xFFFFFFFFu;

  struct Node {
    std::vector<std::pair<char32_t, std::uint32_t>> children;  // sorted
    bool terminal = false;
  };

  std::uint32_t child(std::uint32_t node, char32_t c) const;

  std::vector<Node> nodes_;
  std::size_t size_ = 0;
  std::size_t longest_ = 0;
  std::size_t max_len_;
};

SegDictionary build_dictionary(
    const std::vector<const std::vector<Sentence>*>& corpora,
    bool prune_singletons = true,
    std::size_t max_len = SegDictionary::kDefaultMaxLen);

SegDictionary read_dictionary(const std::filesystem::path& path,
                              std::size_t max_len =
                                  SegDictionary::kDefaultMaxLen);
void write_dictionary(std::ostream& out, const SegDictionary& dict);

}  // namespace kiru
