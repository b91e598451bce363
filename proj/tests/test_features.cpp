#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "kiru/error.hpp"
#include "kiru/features.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace kiru;

namespace {

Sentence raw(std::u32string chars) {
  Sentence s;
  s.chars = std::move(chars);
  return s;
}

std::u32string types(std::initializer_list<CharType> ts) {
  std::u32string out;
  for (CharType t : ts) out.push_back(static_cast<char32_t>(t));
  return out;
}

}  // namespace

TEST_CASE("classify_char_type") {
  CHECK(classify_char_type(U'ひ') == CharType::kHiragana);
  CHECK(classify_char_type(U'カ') == CharType::kKatakana);
  CHECK(classify_char_type(U'ー') == CharType::kKatakana);
  CHECK(classify_char_type(U'ｶ') == CharType::kKatakana);
  CHECK(classify_char_type(U'漢') == CharType::kKanji);
  CHECK(classify_char_type(U'々') == CharType::kKanji);
  CHECK(classify_char_type(U'㐀') == CharType::kKanji);
  CHECK(classify_char_type(U'A') == CharType::kAlphabet);
  CHECK(classify_char_type(U'ｚ') == CharType::kAlphabet);
  CHECK(classify_char_type(U'7') == CharType::kNumber);
  CHECK(classify_char_type(U'７') == CharType::kNumber);
  CHECK(classify_char_type(U'七') == CharType::kNumber);
  CHECK(classify_char_type(U'億') == CharType::kNumber);
  CHECK(classify_char_type(U'。') == CharType::kSymbol);
  CHECK(classify_char_type(U' ') == CharType::kSymbol);
  CHECK(classify_char_type(kBosChar) == CharType::kStart);
  CHECK(classify_char_type(kEosChar) == CharType::kTerminal);
}

TEST_CASE("classify_char_type is total; Start/Terminal only for sentinels") {
  for (char32_t c = 0; c <= 0x10FFFF; ++c) {
    const auto t = classify_char_type(c);
    if (t == CharType::kStart || t == CharType::kTerminal ||
        static_cast<int>(t) >= kNumCharTypes) {
      FAIL("unexpected type for code point " << static_cast<unsigned>(c));
    }
  }
}

TEST_CASE("extract_ngram_ids follows the backward-looking indexing") {
  const Sentence s = raw(U"ため池");
  std::vector<Sentence> corpus{s};
  corpus[0].spans = std::vector<Span>{{0, 3}};
  const Vocabulary vocab = build_vocabulary(corpus);
  const std::u32string bos(1, kBosChar);

  const NgramIds t0 = extract_ngram_ids(s, 0, vocab);
  CHECK(t0.chars[0] == vocab.lookup(Stream::kChar, 1, U"た"));
  CHECK(t0.chars[1] == vocab.lookup(Stream::kChar, 2, bos + U"た"));
  CHECK(t0.chars[2] == vocab.lookup(Stream::kChar, 3, bos + bos + U"た"));
  for (int n = 0; n < 3; ++n) CHECK(t0.chars[n] >= Vocabulary::kReserved);

  const NgramIds t2 = extract_ngram_ids(s, 2, vocab);
  CHECK(t2.chars[0] == vocab.lookup(Stream::kChar, 1, U"池"));
  CHECK(t2.chars[1] == vocab.lookup(Stream::kChar, 2, U"め池"));
  CHECK(t2.chars[2] == vocab.lookup(Stream::kChar, 3, U"ため池"));
  using CT = CharType;
  CHECK(t2.types[0] == vocab.lookup(Stream::kCharType, 1, types({CT::kKanji})));
  CHECK(t2.types[1] ==
        vocab.lookup(Stream::kCharType, 2, types({CT::kHiragana, CT::kKanji})));
  CHECK(t2.types[2] ==
        vocab.lookup(Stream::kCharType, 3,
                     types({CT::kHiragana, CT::kHiragana, CT::kKanji})));
  for (int n = 0; n < 3; ++n) CHECK(t2.types[n] >= Vocabulary::kReserved);

  CHECK(sentence_ngram_ids(s, vocab)[2] == t2);
  CHECK_THROWS_AS(extract_ngram_ids(s, 3, vocab), PreconditionError);
}

TEST_CASE("unseen n-grams map to UNK") {
  std::vector<Sentence> corpus{raw(U"ため池")};
  const Vocabulary vocab = build_vocabulary(corpus);
  const NgramIds ids = extract_ngram_ids(raw(U"絵"), 0, vocab);
  CHECK(ids.chars[0] == Vocabulary::kUnk);
  CHECK(ids.chars[1] == Vocabulary::kUnk);
  CHECK(ids.chars[2] == Vocabulary::kUnk);
  // a kanji unigram type was observed in training
  CHECK(ids.types[0] != Vocabulary::kUnk);
}

TEST_CASE("assemble_window padding") {
  std::vector<Sentence> corpus{raw(U"ため池の絵")};
  const Vocabulary vocab = build_vocabulary(corpus);

  const auto one = assemble_window(raw(U"た"), 0, vocab, 5);
  REQUIRE(one.window.size() == 5);
  CHECK(one.id_count() == 30);
  int sentinel = 0;
  for (const auto& ids : one.window) {
    const bool all_bos = std::all_of(ids.chars.begin(), ids.chars.end(),
                                     [](auto v) { return v == Vocabulary::kBos; });
    const bool all_eos = std::all_of(ids.chars.begin(), ids.chars.end(),
                                     [](auto v) { return v == Vocabulary::kEos; });
    sentinel += all_bos || all_eos;
  }
  CHECK(sentinel == 4);
  CHECK(one.window[0].types[0] == Vocabulary::kBos);
  CHECK(one.window[4].types[2] == Vocabulary::kEos);

  const auto mid = assemble_window(corpus[0], 2, vocab, 5);
  for (const auto& ids : mid.window) {
    for (auto v : ids.chars) CHECK(v >= Vocabulary::kReserved);
  }
  CHECK_THROWS_AS(assemble_window(corpus[0], 2, vocab, 4), ConfigError);
}

TEST_CASE("assemble_window has constant length") {
  testing::Rng rng(11);
  std::vector<Sentence> corpus;
  for (int i = 0; i < 20; ++i) {
    corpus.push_back(testing::random_sentence(rng, 1 + rng() % 9, U"あい池"));
  }
  const Vocabulary vocab = build_vocabulary(corpus);
  for (std::size_t window : {1u, 3u, 5u, 7u}) {
    for (const auto& s : corpus) {
      for (std::size_t t = 0; t < s.size(); ++t) {
        CHECK(assemble_window(s, t, vocab, window).id_count() == 6 * window);
      }
    }
  }
}

TEST_CASE("dictionary_vector examples") {
  SegDictionary dict;
  for (auto w : {U"の", U"ため池", U"絵"}) dict.insert(w);
  const Sentence s = raw(U"ため池の絵");
  const DictVector v = dictionary_vector(s, 3, dict);
  CHECK(testing::to_ints(v) == std::vector<int>{0, 0, 1, 0, 1, 0, 0, 0, 0, 0, 0});

  SegDictionary empty;
  for (std::size_t t = 0; t < s.size(); ++t) {
    CHECK(testing::to_ints(dictionary_vector(s, t, empty)) ==
          std::vector<int>(11, 0));
  }

  SegDictionary ryu;
  ryu.insert(U"とりゅう");
  const DictVector inside = dictionary_vector(raw(U"エルマーとりゅうの"), 5, ryu);
  CHECK(inside.inside(4) == 1);
  CHECK(std::count(inside.bits().begin(), inside.bits().end(), 1) == 1);

  CHECK_THROWS_AS(dictionary_vector(s, 5, dict), PreconditionError);
}

TEST_CASE("at t = 0 only right features can fire") {
  SegDictionary dict;
  for (auto w : {U"あ", U"あい", U"いあ"}) dict.insert(w);
  const DictVector v = dictionary_vector(raw(U"あいあ"), 0, dict);
  CHECK(v.right(1) == 1);
  CHECK(v.right(2) == 1);
  for (std::size_t k = 1; k <= 4; ++k) CHECK(v.left(k) == 0);
  for (std::size_t k = 2; k <= 4; ++k) CHECK(v.inside(k) == 0);
}

TEST_CASE("long words clip to the cutoff length") {
  SegDictionary long_dict;
  long_dict.insert(U"abcdefg");
  SegDictionary short_dict;
  short_dict.insert(U"defg");
  const Sentence s = raw(U"abcdefgh");
  // both words end just before position 7
  CHECK(dictionary_vector(s, 7, long_dict).left(4) == 1);
  CHECK(dictionary_vector(s, 7, long_dict) == dictionary_vector(s, 7, short_dict));
  CHECK(dictionary_vector(s, 3, long_dict).inside(4) == 1);
}

TEST_CASE("dictionary_vector matches brute force on random cases") {
  testing::Rng rng(13);
  const std::u32string alphabet = U"abcde";
  for (int round = 0; round < 2000; ++round) {
    const std::size_t len = 1 + rng() % 8;
    std::u32string chars;
    for (std::size_t i = 0; i < len; ++i) chars.push_back(alphabet[rng() % 5]);
    std::vector<std::u32string> words;
    SegDictionary dict;
    const std::size_t nwords = rng() % 5;
    for (std::size_t w = 0; w < nwords; ++w) {
      std::u32string word;
      const std::size_t wl = 1 + rng() % 6;
      for (std::size_t i = 0; i < wl; ++i) word.push_back(alphabet[rng() % 5]);
      words.push_back(word);
      dict.insert(word);
    }
    const Sentence s = raw(chars);
    const auto all = dictionary_vectors(s, dict);
    for (std::size_t t = 0; t < len; ++t) {
      const auto expected = testing::brute_force_dict_vector(chars, t, words, 4);
      CHECK(testing::to_ints(dictionary_vector(s, t, dict)) == expected);
      CHECK(testing::to_ints(all[t]) == expected);
    }
  }
}
