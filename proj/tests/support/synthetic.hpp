#pragma once

// Synthetic corpora for tests. Nothing here is used by the library.

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kiru/corpus.hpp"

namespace kiru::testing {

using Rng = std::mt19937_64;

// Uniformly random partition of [0, n) into non-empty spans.
std::vector<Span> random_partition(Rng& rng, std::size_t n);

// Random sentence of `n` characters drawn from `alphabet`, with a random
// segmentation.
Sentence random_sentence(Rng& rng, std::size_t n, std::u32string_view alphabet);

// Zipf-distributed words from a lexicon over two scripts (hiragana-like and
// kanji-like): pure-hiragana, pure-kanji and kanji-then-hiragana words.
class LexiconGenerator {
 public:
  explicit LexiconGenerator(std::uint64_t seed, std::size_t lexicon_size = 400);

  // Sentences of min_words..max_words words.
  std::vector<Sentence> corpus(Rng& rng, std::size_t sentences,
                               std::size_t min_words = 3,
                               std::size_t max_words = 8) const;

  const std::vector<std::u32string>& lexicon() const { return words_; }

 private:
  std::vector<std::u32string> words_;
  std::vector<double> weights_;
};

// Sentences made of 9-character blocks: a marker (X or Y), seven random
// fillers, and a cue character z. The cue is split off as its own word iff
// the block's marker, eight positions earlier, is X.
std::vector<Sentence> long_dependency_corpus(Rng& rng, std::size_t sentences,
                                             std::size_t min_blocks = 2,
                                             std::size_t max_blocks = 4);

inline constexpr std::size_t kDependencyDistance = 8;

// Positions whose boundary is decided by the marker at t - 8.
std::vector<std::size_t> dependent_positions(const Sentence& s);

// Fraction of dependent positions where pred and gold agree on whether a word
// starts there.
double dependent_boundary_accuracy(const std::vector<Sentence>& gold,
                                   const std::vector<Sentence>& pred);

}  // namespace kiru::testing
