#include "kiru/features.hpp"

#include <string>

#include "kiru/error.hpp"

namespace kiru {

namespace {

void check_position(const Sentence& sentence, std::size_t t) {
  if (t >= sentence.size()) {
    throw PreconditionError("position " + std::to_string(t) +
                            " out of range for sentence of length " +
                            std::to_string(sentence.size()));
  }
}

NgramIds sentinel_ids(std::int32_t id) {
  NgramIds ids;
  ids.chars.fill(id);
  ids.types.fill(id);
  return ids;
}

// `chars` and `types` are padded with kMaxOrder - 1 leading BOS symbols.
NgramIds ids_at(const std::u32string& chars, const std::u32string& types,
                std::size_t t, const Vocabulary& vocab) {
  NgramIds ids;
  const std::size_t end = t + kMaxOrder;
  std::u32string_view cv(chars);
  std::u32string_view tv(types);
  for (int n = 1; n <= kMaxOrder; ++n) {
    const std::size_t from = end - static_cast<std::size_t>(n);
    ids.chars[n - 1] = vocab.lookup(Stream::kChar, n, cv.substr(from, n));
    ids.types[n - 1] = vocab.lookup(Stream::kCharType, n, tv.substr(from, n));
  }
  return ids;
}

}  // namespace

void check_window(std::size_t window) {
  if (window == 0 || window % 2 == 0) {
    throw ConfigError("window size must be odd, got " +
                      std::to_string(window));
  }
}

NgramIds extract_ngram_ids(const Sentence& sentence, std::size_t t,
                           const Vocabulary& vocab) {
  check_position(sentence, t);
  const std::size_t from = t >= kMaxOrder - 1 ? t - (kMaxOrder - 1) : 0;
  const std::size_t pad = (kMaxOrder - 1) - (t - from);
  std::u32string chars(pad, kBosChar);
  chars.append(sentence.chars, from, t - from + 1);
  std::u32string types(pad, static_cast<char32_t>(CharType::kStart));
  types += char_type_string(std::u32string_view(sentence.chars)
                                .substr(from, t - from + 1));
  return ids_at(chars, types, 0, vocab);
}

std::vector<NgramIds> sentence_ngram_ids(const Sentence& sentence,
                                         const Vocabulary& vocab) {
  std::u32string chars(kMaxOrder - 1, kBosChar);
  chars += sentence.chars;
  std::u32string types(kMaxOrder - 1, static_cast<char32_t>(CharType::kStart));
  types += char_type_string(sentence.chars);
  std::vector<NgramIds> out;
  out.reserve(sentence.size());
  for (std::size_t t = 0; t < sentence.size(); ++t) {
    out.push_back(ids_at(chars, types, t, vocab));
  }
  return out;
}

PositionFeatures assemble_window(const std::vector<NgramIds>& ids,
                                 std::size_t t, std::size_t window) {
  check_window(window);
  if (t >= ids.size()) {
    throw PreconditionError("position " + std::to_string(t) + " out of range");
  }
  const auto half = static_cast<std::ptrdiff_t>(window / 2);
  const auto n = static_cast<std::ptrdiff_t>(ids.size());
  PositionFeatures f;
  f.window.reserve(window);
  for (std::ptrdiff_t j = -half; j <= half; ++j) {
    const std::ptrdiff_t p = static_cast<std::ptrdiff_t>(t) + j;
    if (p < 0) {
      f.window.push_back(sentinel_ids(Vocabulary::kBos));
    } else if (p >= n) {
      f.window.push_back(sentinel_ids(Vocabulary::kEos));
    } else {
      f.window.push_back(ids[static_cast<std::size_t>(p)]);
    }
  }
  return f;
}

PositionFeatures assemble_window(const Sentence& sentence, std::size_t t,
                                 const Vocabulary& vocab, std::size_t window) {
  check_window(window);
  check_position(sentence, t);
  return assemble_window(sentence_ngram_ids(sentence, vocab), t, window);
}

std::vector<DictVector> dictionary_vectors(const Sentence& sentence,
                                           const SegDictionary& dict) {
  const std::size_t n = sentence.size();
  std::vector<DictVector> out(n, DictVector(dict.max_len()));
  if (dict.empty()) return out;
  const std::u32string_view chars(sentence.chars);
  for (std::size_t start = 0; start < n; ++start) {
    dict.for_each_match(chars, start, [&](std::size_t len) {
      const std::size_t end = start + len;
      out[start].set_right(len);
      if (end < n) out[end].set_left(len);
      for (std::size_t t = start + 1; t < end; ++t) out[t].set_inside(len);
    });
  }
  return out;
}

DictVector dictionary_vector(const Sentence& sentence, std::size_t t,
                             const SegDictionary& dict) {
  check_position(sentence, t);
  DictVector v(dict.max_len());
  if (dict.empty()) return v;
  const std::u32string_view chars(sentence.chars);
  const std::size_t reach = dict.longest();
  const std::size_t first = t >= reach ? t - reach : 0;
  for (std::size_t start = first; start <= t; ++start) {
    dict.for_each_match(chars, start, [&](std::size_t len) {
      const std::size_t end = start + len;
      if (start == t) {
        v.set_right(len);
      } else if (end == t) {
        v.set_left(len);
      } else if (end > t) {
        v.set_inside(len);
      }
    });
  }
  return v;
}

}  // namespace kiru
