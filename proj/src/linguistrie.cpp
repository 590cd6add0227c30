#include "wwho/linguistrie.hpp"

namespace wwho {

const char* to_string(SyllableKind k) noexcept {
    switch (k) {
    case SyllableKind::kSyllable: return "SYLLABLE";
    case SyllableKind::kOrphan: return "ORPHAN";
    case SyllableKind::kPassthrough: return "PASSTHROUGH";
    case SyllableKind::kWhitespace: return "WHITESPACE";
    case SyllableKind::kForeign: return "FOREIGN";
    }
    return "?";
}

bool is_scanner_whitespace(char32_t cp) noexcept {
    return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\v' || cp == U'\f';
}

namespace {

struct Match {
    SyllableKind kind;
    std::size_t length;
};

Match scan_at(std::u32string_view text, std::size_t pos, const LanguageSchema& schema, ScanStats* stats) {
    const DfaTable& dfa = schema.dfa();
    if (stats) ++stats->examined;
    int state = dfa.next(dfa.start(), schema.classify_index(text[pos]));
    if (state == DfaTable::kOrphan) return {SyllableKind::kOrphan, 1};
    if (state < 0) return {SyllableKind::kPassthrough, 1};

    std::size_t last_accept = dfa.accepting(state) ? pos + 1 : 0;
    for (std::size_t i = pos + 1; i < text.size(); ++i) {
        if (stats) ++stats->examined;
        const char32_t cp = text[i];
        if (is_scanner_whitespace(cp)) break;
        int nx = dfa.next(state, schema.classify_index(cp));
        if (nx < 0) break;
        state = nx;
        if (dfa.accepting(state)) last_accept = i + 1;
    }
    if (last_accept == 0) return {SyllableKind::kOrphan, 1};
    return {SyllableKind::kSyllable, last_accept - pos};
}

} // namespace

std::vector<Syllable> syllabify(std::u32string_view text, const LanguageSchema& schema, ScanStats* stats) {
    std::vector<Syllable> out;
    std::size_t pos = 0;
    const std::size_t n = text.size();
    while (pos < n) {
        const char32_t cp = text[pos];
        if (cp == U' ' && pos + 1 < n && !is_scanner_whitespace(text[pos + 1])) {
            Match m = scan_at(text, pos + 1, schema, stats);
            if (m.kind == SyllableKind::kSyllable) {
                out.push_back({std::u32string(text.substr(pos, m.length + 1)), SyllableKind::kSyllable, true});
            } else {
                out.push_back({U" ", SyllableKind::kWhitespace, false});
                out.push_back({std::u32string(1, text[pos + 1]), m.kind, false});
            }
            pos += m.length + 1;
            continue;
        }
        if (is_scanner_whitespace(cp)) {
            out.push_back({std::u32string(1, cp), SyllableKind::kWhitespace, false});
            ++pos;
            continue;
        }
        Match m = scan_at(text, pos, schema, stats);
        out.push_back({std::u32string(text.substr(pos, m.length)), m.kind, false});
        pos += m.length;
    }
    return out;
}

std::vector<Syllable> syllabify_text(std::u32string_view text, std::span<const LanguageSchema> schemas) {
    std::vector<Syllable> out;
    for (auto& seg : route(text, schemas)) {
        if (seg.is_other()) {
            out.push_back({std::move(seg.text), SyllableKind::kForeign, false});
            continue;
        }
        auto syl = syllabify(seg.text, schemas[static_cast<std::size_t>(seg.script)]);
        out.insert(out.end(), std::make_move_iterator(syl.begin()), std::make_move_iterator(syl.end()));
    }
    return out;
}

} // namespace wwho
