#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wwho/router.hpp"
#include "wwho/schema.hpp"

namespace wwho {

enum class SyllableKind {
    kSyllable,     ///< grammar-accepted unit, optionally space-prefixed
    kOrphan,       ///< single codepoint that START routes to ORPHAN
    kPassthrough,  ///< single class-O codepoint
    kWhitespace,   ///< single whitespace codepoint not attached to a syllable
    kForeign,      ///< a whole OTHER segment (syllabify_text only)
};

const char* to_string(SyllableKind k) noexcept;

struct Syllable {
    std::u32string text;
    SyllableKind kind = SyllableKind::kSyllable;
    bool space_prefixed = false;

    /// text without the attached space, if any.
    std::u32string_view body() const noexcept {
        return space_prefixed ? std::u32string_view(text).substr(1) : std::u32string_view(text);
    }
    friend bool operator==(const Syllable&, const Syllable&) = default;
};

struct ScanStats {
    /// Codepoints classified by the scanner, counting re-reads.
    std::size_t examined = 0;
};

bool is_scanner_whitespace(char32_t cp) noexcept;

/// Maximal-munch syllabification of one segment.
///
/// From each start position the DFA runs until a missing transition or the end
/// of input, remembering the end of the last accepting state; the scanner emits
/// up to that point and resumes there. A single U+0020 immediately followed by a
/// syllable becomes that syllable's prefix. Any other whitespace, or a space
/// before an orphan or passthrough, is emitted standalone.
std::vector<Syllable> syllabify(std::u32string_view text, const LanguageSchema& schema, ScanStats* stats = nullptr);

/// Routes the text, syllabifies each Abugida segment and keeps each OTHER
/// segment as a single kForeign item.
std::vector<Syllable> syllabify_text(std::u32string_view text, std::span<const LanguageSchema> schemas);

} // namespace wwho
