#include "wwho/router.hpp"

namespace wwho {

int script_of(char32_t cp, std::span<const LanguageSchema> schemas) noexcept {
    for (std::size_t i = 0; i < schemas.size(); ++i) {
        if (schemas[i].in_blocks(cp)) return static_cast<int>(i);
    }
    return kOtherScript;
}

std::string script_name(int script, std::span<const LanguageSchema> schemas) {
    if (script < 0 || static_cast<std::size_t>(script) >= schemas.size()) return "OTHER";
    return schemas[static_cast<std::size_t>(script)].name();
}

namespace {

bool any_joiner(char32_t cp, std::span<const LanguageSchema> schemas) {
    for (const auto& s : schemas) {
        if (s.is_joiner(cp)) return true;
    }
    return false;
}

bool declares(int script, char32_t joiner, std::span<const LanguageSchema> schemas) {
    return script >= 0 && schemas[static_cast<std::size_t>(script)].is_joiner(joiner);
}

} // namespace

std::vector<Segment> route(std::u32string_view text, std::span<const LanguageSchema> schemas, RouteStats* stats) {
    const std::size_t n = text.size();
    std::vector<int> owner(n, kOtherScript);
    std::vector<unsigned char> joiner(n, 0);

    // Forward pass: block lookup, and joiners adopt a preceding Abugida script.
    for (std::size_t i = 0; i < n; ++i) {
        const char32_t cp = text[i];
        if (stats) ++stats->lookups;
        int s = script_of(cp, schemas);
        if (s == kOtherScript && any_joiner(cp, schemas)) {
            joiner[i] = 1;
            if (i > 0 && declares(owner[i - 1], cp, schemas)) s = owner[i - 1];
        }
        owner[i] = s;
    }
    // Backward pass: unresolved joiners look at the next non-joiner codepoint.
    int next_script = kOtherScript;
    for (std::size_t i = n; i-- > 0;) {
        if (!joiner[i]) {
            next_script = owner[i];
        } else if (owner[i] == kOtherScript && declares(next_script, text[i], schemas)) {
            owner[i] = next_script;
        }
    }

    std::vector<Segment> out;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && owner[j] == owner[i]) ++j;
        Segment seg{owner[i], std::u32string(text.substr(i, j - i)), false, i};
        if (!seg.is_other() && !out.empty() && out.back().is_other() && out.back().text.back() == U' ') {
            Segment& prev = out.back();
            prev.text.pop_back();
            seg.text.insert(seg.text.begin(), U' ');
            seg.leading_space = true;
            seg.offset -= 1;
            if (prev.text.empty()) out.pop_back();
        }
        out.push_back(std::move(seg));
        i = j;
    }
    return out;
}

} // namespace wwho
