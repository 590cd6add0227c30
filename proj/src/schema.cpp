#include "wwho/schema.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include "json_util.hpp"
#include "wwho/error.hpp"
#include "wwho/utf8.hpp"

#ifndef WWHO_BUNDLED_SCHEMA_DIR
#define WWHO_BUNDLED_SCHEMA_DIR ""
#endif

namespace wwho {

namespace detail {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed for " + path);
}

namespace {

[[noreturn]] void field_error(std::string_view origin, std::string_view field, const std::string& what) {
    throw ParseError("schema " + std::string(origin) + ": field '" + std::string(field) + "': " + what);
}

char32_t parse_hex_point(std::string_view s, std::string_view origin, std::string_view field) {
    if (s.size() > 2 && (s[0] == 'U' || s[0] == 'u') && s[1] == '+') s.remove_prefix(2);
    if (s.empty() || s.size() > 6) field_error(origin, field, "bad codepoint \"" + std::string(s) + "\"");
    char32_t v = 0;
    for (char c : s) {
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
        else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else field_error(origin, field, "bad codepoint \"" + std::string(s) + "\"");
        v = v * 16 + static_cast<char32_t>(d);
    }
    if (v > 0x10FFFF) field_error(origin, field, "codepoint out of range \"" + std::string(s) + "\"");
    return v;
}

CodepointRange parse_range(const ojson& v, std::string_view origin, std::string_view field) {
    if (!v.is_string()) field_error(origin, field, "expected a hex range string");
    std::string s = v.get<std::string>();
    auto dash = s.find('-');
    if (dash == std::string::npos) {
        char32_t p = parse_hex_point(s, origin, field);
        return {p, p};
    }
    CodepointRange r{parse_hex_point(std::string_view(s).substr(0, dash), origin, field),
                     parse_hex_point(std::string_view(s).substr(dash + 1), origin, field)};
    if (r.first > r.last) field_error(origin, field, "inverted range \"" + s + "\"");
    return r;
}

std::vector<std::string> string_list(const ojson& doc, const char* key, std::string_view origin) {
    if (!doc.contains(key)) field_error(origin, key, "missing");
    const auto& v = doc.at(key);
    if (!v.is_array()) field_error(origin, key, "expected an array");
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) field_error(origin, key, "expected strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

std::string hex_point(char32_t cp) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04X", static_cast<unsigned>(cp));
    return buf;
}

ClassTag parse_tag(const std::string& k, std::string_view origin, std::string_view field) {
    if (k.size() != 1 || k[0] < 'A' || k[0] > 'Z')
        field_error(origin, field, "class tag must be one uppercase letter, got \"" + k + "\"");
    return k[0];
}

} // namespace

ojson schema_to_json_value(const SchemaDefinition& def) {
    ojson doc;
    doc["name"] = def.name;
    ojson blocks = ojson::array();
    for (const auto& b : def.blocks) blocks.push_back(format_range(b));
    doc["blocks"] = blocks;
    ojson joiners = ojson::array();
    for (char32_t j : def.joiners) joiners.push_back(hex_point(j));
    doc["joiners"] = joiners;
    ojson classes = ojson::object();
    for (const auto& c : def.classes) {
        ojson ranges = ojson::array();
        for (const auto& r : c.ranges) ranges.push_back(format_range(r));
        classes[std::string(1, c.tag)] = ranges;
    }
    doc["classes"] = classes;
    doc["states"] = def.states;
    doc["accept_states"] = def.accept_states;
    // Array form keeps duplicate (state, tag) pairs representable.
    ojson trans = ojson::array();
    for (const auto& t : def.transitions) trans.push_back(ojson::array({t.from, std::string(1, t.tag), t.to}));
    doc["transitions"] = trans;
    doc["grammar"] = def.grammar;
    if (!def.notes.empty()) doc["notes"] = def.notes;
    return doc;
}

SchemaDefinition schema_from_json_value(const ojson& doc, std::string_view origin) {
    if (!doc.is_object()) throw ParseError("schema " + std::string(origin) + ": top level must be an object");
    SchemaDefinition def;
    if (!doc.contains("name") || !doc.at("name").is_string()) field_error(origin, "name", "missing or not a string");
    def.name = doc.at("name").get<std::string>();
    if (def.name.empty() || def.name == "OTHER") field_error(origin, "name", "reserved or empty name");

    if (!doc.contains("blocks") || !doc.at("blocks").is_array()) field_error(origin, "blocks", "missing or not an array");
    for (const auto& b : doc.at("blocks")) def.blocks.push_back(parse_range(b, origin, "blocks"));

    if (doc.contains("joiners")) {
        for (const auto& j : doc.at("joiners")) {
            auto r = parse_range(j, origin, "joiners");
            if (r.first != r.last) field_error(origin, "joiners", "joiners are single codepoints");
            def.joiners.push_back(r.first);
        }
    }

    if (!doc.contains("classes") || !doc.at("classes").is_object()) field_error(origin, "classes", "missing or not an object");
    for (const auto& [k, v] : doc.at("classes").items()) {
        std::string field = "classes." + k;
        CharClass c;
        c.tag = parse_tag(k, origin, field);
        if (c.tag == kOtherTag) field_error(origin, field, "class O is implicit and cannot be declared");
        if (!v.is_array()) field_error(origin, field, "expected an array of ranges");
        for (const auto& r : v) c.ranges.push_back(parse_range(r, origin, field));
        def.classes.push_back(std::move(c));
    }

    def.states = string_list(doc, "states", origin);
    def.accept_states = string_list(doc, "accept_states", origin);

    if (!doc.contains("transitions")) field_error(origin, "transitions", "missing");
    const auto& trans = doc.at("transitions");
    if (trans.is_object()) {
        for (const auto& [from, row] : trans.items()) {
            if (!row.is_object()) field_error(origin, "transitions." + from, "expected an object");
            for (const auto& [tag, to] : row.items()) {
                std::string field = "transitions." + from + "." + tag;
                if (!to.is_string()) field_error(origin, field, "target must be a state name");
                def.transitions.push_back({from, parse_tag(tag, origin, field), to.get<std::string>()});
            }
        }
    } else if (trans.is_array()) {
        for (const auto& t : trans) {
            if (!t.is_array() || t.size() != 3 || !t[0].is_string() || !t[1].is_string() || !t[2].is_string())
                field_error(origin, "transitions", "entries must be [state, tag, target]");
            def.transitions.push_back({t[0].get<std::string>(), parse_tag(t[1].get<std::string>(), origin, "transitions"),
                                       t[2].get<std::string>()});
        }
    } else {
        field_error(origin, "transitions", "expected an object or an array");
    }

    if (!doc.contains("grammar") || !doc.at("grammar").is_string()) field_error(origin, "grammar", "missing or not a string");
    def.grammar = doc.at("grammar").get<std::string>();
    if (doc.contains("notes")) def.notes = string_list(doc, "notes", origin);
    return def;
}

} // namespace detail

using detail::ojson;

std::string format_range(const CodepointRange& r) {
    char buf[32];
    if (r.first == r.last) {
        std::snprintf(buf, sizeof buf, "%04X", static_cast<unsigned>(r.first));
    } else {
        std::snprintf(buf, sizeof buf, "%04X-%04X", static_cast<unsigned>(r.first), static_cast<unsigned>(r.last));
    }
    return buf;
}

SchemaDefinition parse_schema_definition(std::string_view json_text, std::string_view origin) {
    // Object-form transitions may repeat a key, which a JSON object cannot hold.
    // The parser callback records every (state, tag, target) triple as it streams
    // past so the determinism check still sees duplicates.
    struct Frame {
        bool object;
        std::string key;
        std::set<std::string> seen;
    };
    std::vector<Frame> frames;
    std::vector<Transition> streamed;
    std::string duplicate;

    auto path = [&frames] {
        std::string p;
        for (const auto& f : frames) {
            if (!f.object) break;
            if (!p.empty()) p += '.';
            p += f.key;
        }
        return p;
    };

    ojson::parser_callback_t cb = [&](int, ojson::parse_event_t ev, ojson& parsed) {
        switch (ev) {
        case ojson::parse_event_t::object_start:
            frames.push_back({true, {}, {}});
            break;
        case ojson::parse_event_t::array_start:
            frames.push_back({false, {}, {}});
            break;
        case ojson::parse_event_t::object_end:
        case ojson::parse_event_t::array_end:
            if (!frames.empty()) frames.pop_back();
            break;
        case ojson::parse_event_t::key: {
            auto& top = frames.back();
            top.key = parsed.get<std::string>();
            bool in_transitions = frames.size() >= 2 && frames[0].key == "transitions";
            if (!top.seen.insert(top.key).second && !in_transitions && duplicate.empty())
                duplicate = path();
            break;
        }
        case ojson::parse_event_t::value:
            if (frames.size() == 3 && frames[0].key == "transitions" && frames[1].object && frames[2].object &&
                parsed.is_string() && frames[2].key.size() == 1) {
                streamed.push_back({frames[1].key, frames[2].key[0], parsed.get<std::string>()});
            }
            break;
        }
        return true;
    };

    ojson doc;
    try {
        doc = ojson::parse(json_text.begin(), json_text.end(), cb);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("schema " + std::string(origin) + ": " + e.what());
    }
    if (!duplicate.empty()) throw ParseError("schema " + std::string(origin) + ": duplicate key '" + duplicate + "'");

    SchemaDefinition def = detail::schema_from_json_value(doc, origin);
    if (doc.at("transitions").is_object()) {
        for (auto& t : streamed) {
            if (t.tag < 'A' || t.tag > 'Z')
                throw ParseError("schema " + std::string(origin) + ": field 'transitions': bad tag");
        }
        def.transitions = std::move(streamed);
    }
    return def;
}

std::string schema_definition_to_json(const SchemaDefinition& def) {
    return detail::schema_to_json_value(def).dump(2);
}

LanguageSchema LanguageSchema::compile(SchemaDefinition def) {
    LanguageSchema s;
    const std::string origin = def.name;
    auto fail = [&](const std::string& field, const std::string& what) {
        throw ParseError("schema " + origin + ": field '" + field + "': " + what);
    };

    for (const auto& c : def.classes) {
        if (s.tags_.find(c.tag) != std::string::npos) fail("classes", std::string("class ") + c.tag + " declared twice");
        s.tags_.push_back(c.tag);
    }
    s.tags_.push_back(kOtherTag);
    const std::size_t ntags = s.tags_.size();

    // States.
    auto is_emit = [](const std::string& n) { return n == kOrphanState || n == kPassthroughState; };
    std::map<std::string, int> index;
    for (const auto& n : def.states) {
        if (is_emit(n)) fail("states", n + " is an emit state and cannot be a table row");
        if (!index.emplace(n, static_cast<int>(index.size())).second) fail("states", "duplicate state " + n);
    }
    auto start = index.find(std::string(kStartState));
    if (start == index.end()) fail("states", "START is missing");

    DfaTable& dfa = s.dfa_;
    dfa.names_ = def.states;
    dfa.start_ = start->second;
    dfa.tag_count_ = ntags;
    dfa.accepting_.assign(def.states.size(), 0);
    for (const auto& a : def.accept_states) {
        if (is_emit(a)) continue;  // reported by validate_schema
        auto it = index.find(a);
        if (it == index.end()) fail("accept_states", "unknown state " + a);
        dfa.accepting_[static_cast<std::size_t>(it->second)] = 1;
    }

    dfa.table_.assign(def.states.size() * ntags, DfaTable::kBoundary);
    std::vector<unsigned char> filled(dfa.table_.size(), 0);
    for (const auto& t : def.transitions) {
        const std::string field = "transitions." + t.from + "." + std::string(1, t.tag);
        auto tag_pos = s.tags_.find(t.tag);
        if (tag_pos == std::string::npos) fail(field, "unknown class tag");
        int target;
        if (t.to == kOrphanState) {
            target = DfaTable::kOrphan;
        } else if (t.to == kPassthroughState) {
            target = DfaTable::kPassthrough;
        } else {
            auto it = index.find(t.to);
            if (it == index.end()) fail(field, "unknown target state " + t.to);
            target = it->second;
        }
        if (is_emit(t.from)) continue;  // reported by validate_schema
        auto from = index.find(t.from);
        if (from == index.end()) fail(field, "unknown source state " + t.from);
        // Outside START an emit-state target cannot emit anything: the scanner
        // falls back to the last accept, exactly as on a missing transition.
        if (target < 0 && from->second != dfa.start_) target = DfaTable::kBoundary;
        std::size_t cell = static_cast<std::size_t>(from->second) * ntags + tag_pos;
        if (filled[cell]) continue;  // first wins; duplicates reported by validate_schema
        filled[cell] = 1;
        dfa.table_[cell] = target;
    }

    // Classifier.
    const auto other = static_cast<unsigned char>(ntags - 1);
    for (const auto& b : def.blocks) {
        if (b.last - b.first > 0x20000) fail("blocks", "block " + format_range(b) + " is too large");
        s.blocks_.push_back({b, std::vector<unsigned char>(b.last - b.first + 1, other)});
    }
    for (std::size_t ci = 0; ci < def.classes.size(); ++ci) {
        for (const auto& r : def.classes[ci].ranges) {
            bool all_inside = false;
            for (auto& blk : s.blocks_) {
                if (r.first >= blk.range.first && r.last <= blk.range.last) all_inside = true;
                char32_t lo = std::max(r.first, blk.range.first);
                char32_t hi = std::min(r.last, blk.range.last);
                for (char32_t cp = lo; lo <= hi && cp <= hi; ++cp) {
                    auto& slot = blk.tag_of[cp - blk.range.first];
                    if (slot == other) slot = static_cast<unsigned char>(ci);
                }
            }
            if (!all_inside) s.extras_.push_back({r, static_cast<int>(ci)});
        }
    }

    s.grammar_ = ClassGrammar::compile(def.grammar);
    for (char t : s.grammar_.alphabet()) {
        if (s.tags_.find(t) == std::string::npos) fail("grammar", std::string("grammar uses undeclared tag ") + t);
    }
    s.def_ = std::move(def);
    return s;
}

int LanguageSchema::tag_index(ClassTag tag) const noexcept {
    auto p = tags_.find(tag);
    return p == std::string::npos ? -1 : static_cast<int>(p);
}

int LanguageSchema::classify_index(char32_t cp) const noexcept {
    for (const auto& b : blocks_) {
        if (b.range.contains(cp)) return b.tag_of[cp - b.range.first];
    }
    for (const auto& e : extras_) {
        if (e.range.contains(cp)) return e.tag;
    }
    return static_cast<int>(tags_.size()) - 1;
}

bool LanguageSchema::in_blocks(char32_t cp) const noexcept {
    return std::any_of(blocks_.begin(), blocks_.end(), [cp](const Block& b) { return b.range.contains(cp); });
}

bool LanguageSchema::is_joiner(char32_t cp) const noexcept {
    return std::find(def_.joiners.begin(), def_.joiners.end(), cp) != def_.joiners.end();
}

std::optional<std::size_t> LanguageSchema::dfa_longest_prefix(std::string_view tags) const {
    int state = dfa_.start();
    std::optional<std::size_t> best;
    if (dfa_.accepting(state)) best = 0;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        int ti = tag_index(tags[i]);
        if (ti < 0) break;
        int nx = dfa_.next(state, ti);
        if (nx < 0) break;
        state = nx;
        if (dfa_.accepting(state)) best = i + 1;
    }
    return best;
}

bool LanguageSchema::dfa_accepts(std::string_view tags) const {
    auto p = dfa_longest_prefix(tags);
    return p && *p == tags.size();
}

std::vector<std::string> validate_schema(const LanguageSchema& schema, const ValidateOptions& opts) {
    std::vector<std::string> out;
    const SchemaDefinition& def = schema.definition();

    // 1. Disjoint character classes.
    for (std::size_t a = 0; a < def.classes.size(); ++a) {
        for (std::size_t b = a + 1; b < def.classes.size(); ++b) {
            for (const auto& ra : def.classes[a].ranges) {
                for (const auto& rb : def.classes[b].ranges) {
                    if (ra.first <= rb.last && rb.first <= ra.last) {
                        out.push_back("disjoint classes violated: " + codepoint_label(std::max(ra.first, rb.first)) +
                                      " assigned to both " + def.classes[a].tag + " and " + def.classes[b].tag);
                    }
                }
            }
        }
    }

    // 2. Completeness.
    if (def.blocks.empty()) out.emplace_back("completeness violated: no block range declared");
    for (const auto& c : def.classes) {
        for (const auto& r : c.ranges) {
            for (char32_t cp = r.first; cp <= r.last; ++cp) {
                if (!schema.in_blocks(cp) && !schema.is_joiner(cp)) {
                    out.push_back("completeness violated: " + codepoint_label(cp) + " in class " + c.tag +
                                  " lies outside every declared block");
                    break;
                }
            }
        }
    }

    // 3. Determinism.
    std::map<std::pair<std::string, ClassTag>, int> seen;
    for (const auto& t : def.transitions) {
        if (++seen[{t.from, t.tag}] == 2)
            out.push_back("determinism violated: state " + t.from + " has more than one transition on " + t.tag);
    }

    // 4. Emit-state isolation.
    for (const auto& t : def.transitions) {
        if (t.from == kOrphanState || t.from == kPassthroughState)
            out.push_back("emit-state isolation violated: " + t.from + " has an outgoing transition on " + t.tag);
    }
    for (const auto& a : def.accept_states) {
        if (a == kOrphanState || a == kPassthroughState)
            out.push_back("emit-state isolation violated: " + a + " is listed as accepting");
    }

    // 5 and 6. Grammar alignment and longest-match agreement over every tag string
    // up to the enumeration bound.
    const std::string& tags = schema.tags();
    std::string probe;
    bool aligned = true;
    bool munch = true;
    for (std::size_t len = 0; len <= opts.max_length && (aligned || munch); ++len) {
        std::vector<std::size_t> digits(len, 0);
        probe.assign(len, tags[0]);
        while (true) {
            bool dfa_ok = schema.dfa_accepts(probe);
            bool re_ok = schema.grammar().matches(probe);
            if (aligned && dfa_ok != re_ok) {
                aligned = false;
                out.push_back("grammar alignment violated at \"" + probe + "\": DFA " +
                              (dfa_ok ? "accepts" : "rejects") + ", grammar " + (re_ok ? "accepts" : "rejects"));
            }
            if (munch && schema.dfa_longest_prefix(probe) != schema.grammar().longest_prefix(probe)) {
                munch = false;
                out.push_back("maximal-munch consistency violated at \"" + probe +
                              "\": scanner and grammar disagree on the longest syllable");
            }
            std::size_t k = len;
            while (k > 0 && ++digits[k - 1] == tags.size()) {
                digits[k - 1] = 0;
                probe[k - 1] = tags[0];
                --k;
            }
            if (k == 0) break;
            probe[k - 1] = tags[digits[k - 1]];
        }
    }
    return out;
}

LanguageSchema load_schema_text(std::string_view json_text, std::string_view origin) {
    LanguageSchema s = LanguageSchema::compile(parse_schema_definition(json_text, origin));
    auto violations = validate_schema(s);
    if (!violations.empty()) {
        std::string msg = "schema " + std::string(origin) + " is invalid:";
        for (const auto& v : violations) msg += "\n  " + v;
        throw ValidationError(msg);
    }
    return s;
}

LanguageSchema load_schema(const std::filesystem::path& path) {
    return load_schema_text(detail::read_file(path.string()), path.string());
}

std::filesystem::path resolve_schema_path(std::string_view name_or_path) {
    namespace fs = std::filesystem;
    fs::path direct(name_or_path);
    if (fs::is_regular_file(direct)) return direct;
    const std::string file = std::string(name_or_path) + ".schema.json";
    if (const char* env = std::getenv("WWHO_SCHEMA_DIR"); env && *env) {
        fs::path p = fs::path(env) / file;
        if (fs::is_regular_file(p)) return p;
    }
    fs::path bundled = fs::path(WWHO_BUNDLED_SCHEMA_DIR) / file;
    if (!std::string_view(WWHO_BUNDLED_SCHEMA_DIR).empty() && fs::is_regular_file(bundled)) return bundled;
    throw ValidationError("schema not found: " + std::string(name_or_path));
}

} // namespace wwho
