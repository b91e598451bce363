#include "kiru/chartype.hpp"

namespace kiru {

namespace {

bool is_kanji_numeral(char32_t c) {
  switch (c) {
    case U'〇': case U'一': case U'二': case U'三': case U'四':
    case U'五': case U'六': case U'七': case U'八': case U'九':
    case U'十': case U'百': case U'千': case U'万': case U'億':
    case U'兆':
      return true;
    default:
      return false;
  }
}

}  // namespace

CharType classify_char_type(char32_t c) {
  if (c == kBosChar) return CharType::kStart;
  if (c == kEosChar) return CharType::kTerminal;

  if ((c >= U'0' && c <= U'9') || (c >= 0xFF10 && c <= 0xFF19) ||
      is_kanji_numeral(c)) {
    return CharType::kNumber;
  }
  if ((c >= U'A' && c <= U'Z') || (c >= U'a' && c <= U'z') ||
      (c >= 0xFF21 && c <= 0xFF3A) || (c >= 0xFF41 && c <= 0xFF5A)) {
    return CharType::kAlphabet;
  }
  if (c >= 0x3041 && c <= 0x309F) return CharType::kHiragana;
  if ((c >= 0x30A0 && c <= 0x30FF) || (c >= 0x31F0 && c <= 0x31FF) ||
      (c >= 0xFF66 && c <= 0xFF9D)) {
    return CharType::kKatakana;
  }
  if ((c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) ||
      c == 0x3005) {
    return CharType::kKanji;
  }
  return CharType::kSymbol;
}

std::string_view char_type_name(CharType t) {
  switch (t) {
    case CharType::kHiragana: return "hiragana";
    case CharType::kKatakana: return "katakana";
    case CharType::kKanji: return "kanji";
    case CharType::kAlphabet: return "alphabet";
    case CharType::kNumber: return "number";
    case CharType::kSymbol: return "symbol";
    case CharType::kStart: return "start";
    case CharType::kTerminal: return "terminal";
  }
  return "?";
}

}  // namespace kiru
