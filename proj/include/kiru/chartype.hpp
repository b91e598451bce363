#pragma once

#include <cstdint>
#include <string_view>

namespace kiru {

// Padding symbols for the character stream. Both lie outside the Unicode
// scalar range so they can never collide with text.
inline constexpr char32_t kBosChar = 0x110000;
inline constexpr char32_t kEosChar = 0x110001;

enum class CharType : std::uint8_t {
  kHiragana = 0,
  kKatakana,
  kKanji,
  kAlphabet,
  kNumber,
  kSymbol,
  kStart,
  kTerminal,
};

inline constexpr int kNumCharTypes = 8;

// Total over all code points. Kanji numerals classify as kNumber; kBosChar
// and kEosChar map to kStart and kTerminal.
CharType classify_char_type(char32_t c);

std::string_view char_type_name(CharType t);

}  // namespace kiru
