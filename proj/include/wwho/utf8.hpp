#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace wwho {

/// Decodes strict UTF-8. Throws ParseError on malformed sequences, overlongs and surrogates.
std::u32string decode_utf8(std::string_view bytes);

std::string encode_utf8(std::u32string_view cps);
void append_utf8(std::string& out, char32_t cp);

/// NFC-normalizes UTF-8 text (ICU).
std::string normalize_nfc(std::string_view text);

/// "U+0D9A" style label used in diagnostics.
std::string codepoint_label(char32_t cp);

inline bool is_ascii(std::string_view s) {
    for (unsigned char c : s) {
        if (c >= 0x80) return false;
    }
    return true;
}

} // namespace wwho
