#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wwho/schema.hpp"

namespace wwho {

/// Script index used for text no schema claims.
inline constexpr int kOtherScript = -1;

struct Segment {
    /// Index into the schema list, or kOtherScript.
    int script = kOtherScript;
    /// The segment's codepoints, including an absorbed leading space.
    std::u32string text;
    /// True iff one space preceding this Abugida run was moved into it.
    bool leading_space = false;
    /// Codepoint offset of text[0] in the routed input.
    std::size_t offset = 0;

    bool is_other() const noexcept { return script == kOtherScript; }
    friend bool operator==(const Segment&, const Segment&) = default;
};

struct RouteStats {
    /// Codepoint classifications performed.
    std::size_t lookups = 0;
};

/// Script owning a codepoint by block membership; joiners are not resolved here.
int script_of(char32_t cp, std::span<const LanguageSchema> schemas) noexcept;

std::string script_name(int script, std::span<const LanguageSchema> schemas);

/// Partitions text into maximal script runs.
///
/// A joiner takes the script of the preceding codepoint when that script is an
/// Abugida whose schema declares the joiner, otherwise that of the following
/// non-joiner codepoint under the same condition, otherwise OTHER. A single
/// U+0020 directly before an Abugida run moves into that run with the
/// leading_space flag set. Empty OTHER runs are dropped.
std::vector<Segment> route(std::u32string_view text, std::span<const LanguageSchema> schemas,
                           RouteStats* stats = nullptr);

} // namespace wwho
