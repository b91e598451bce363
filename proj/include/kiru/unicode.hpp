#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace kiru {

// Strict UTF-8 decoding: rejects overlong forms, surrogates and values past
// U+10FFFF. Throws DecodeError tagged with `line`.
std::u32string decode_utf8(std::string_view bytes, std::size_t line = 0);

void append_utf8(char32_t c, std::string& out);
std::string encode_utf8(std::u32string_view chars);

}  // namespace kiru
