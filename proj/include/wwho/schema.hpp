#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wwho/grammar.hpp"

namespace wwho {

/// Single-letter character class tag ('C', 'V', 'P', 'H', 'Z', 'N', 'M', ...).
using ClassTag = char;

/// Implicit tag for every codepoint not claimed by a declared class.
inline constexpr ClassTag kOtherTag = 'O';

inline constexpr std::string_view kStartState = "START";
inline constexpr std::string_view kOrphanState = "ORPHAN";
inline constexpr std::string_view kPassthroughState = "PASSTHROUGH";

struct CodepointRange {
    char32_t first = 0;
    char32_t last = 0;

    bool contains(char32_t cp) const noexcept { return cp >= first && cp <= last; }
    friend bool operator==(const CodepointRange&, const CodepointRange&) = default;
};

struct CharClass {
    ClassTag tag = kOtherTag;
    std::vector<CodepointRange> ranges;
};

struct Transition {
    std::string from;
    ClassTag tag = kOtherTag;
    std::string to;
};

/// Schema exactly as declared in its file, before compilation. Duplicate
/// transitions are preserved so the validator can report them.
struct SchemaDefinition {
    std::string name;
    std::vector<CodepointRange> blocks;
    std::vector<char32_t> joiners;
    std::vector<CharClass> classes;
    std::vector<std::string> states;
    std::vector<std::string> accept_states;
    std::vector<Transition> transitions;
    std::string grammar;
    std::vector<std::string> notes;
};

/// Compiled transition table. States are indexed in declaration order; the
/// emit states are not table rows but negative targets.
class DfaTable {
public:
    static constexpr int kBoundary = -1;
    static constexpr int kOrphan = -2;
    static constexpr int kPassthrough = -3;

    int start() const noexcept { return start_; }
    std::size_t state_count() const noexcept { return names_.size(); }
    const std::string& state_name(int s) const { return names_.at(static_cast<std::size_t>(s)); }
    bool accepting(int s) const { return accepting_.at(static_cast<std::size_t>(s)) != 0; }

    /// Target for (state, tag index): a state index or one of the negative markers.
    int next(int state, int tag_index) const noexcept {
        return table_[static_cast<std::size_t>(state) * tag_count_ + static_cast<std::size_t>(tag_index)];
    }

private:
    friend class LanguageSchema;
    std::vector<std::string> names_;
    std::vector<unsigned char> accepting_;
    std::vector<int> table_;
    std::size_t tag_count_ = 0;
    int start_ = 0;
};

/// A compiled, immutable language schema. Classification is a direct table
/// lookup per declared block.
class LanguageSchema {
public:
    /// Builds classifier and DFA from a definition. Structural problems that make
    /// the table unbuildable (unknown state or tag names, bad grammar) throw
    /// ParseError; semantic conditions are left to validate_schema.
    static LanguageSchema compile(SchemaDefinition def);

    const std::string& name() const noexcept { return def_.name; }
    const SchemaDefinition& definition() const noexcept { return def_; }
    const DfaTable& dfa() const noexcept { return dfa_; }
    const ClassGrammar& grammar() const noexcept { return grammar_; }

    /// Every tag of the schema, declared classes first and 'O' last.
    const std::string& tags() const noexcept { return tags_; }
    std::size_t class_count() const noexcept { return tags_.size(); }
    int tag_index(ClassTag tag) const noexcept;

    ClassTag classify(char32_t cp) const noexcept { return tags_[static_cast<std::size_t>(classify_index(cp))]; }
    int classify_index(char32_t cp) const noexcept;

    bool in_blocks(char32_t cp) const noexcept;
    bool is_joiner(char32_t cp) const noexcept;

    /// Runs the DFA over a tag string; true iff it ends in an accepting state.
    bool dfa_accepts(std::string_view tags) const;
    /// Longest DFA-accepted prefix of a tag string, following the table until it stops.
    std::optional<std::size_t> dfa_longest_prefix(std::string_view tags) const;

private:
    struct Block {
        CodepointRange range;
        std::vector<unsigned char> tag_of;
    };
    struct Extra {
        CodepointRange range;
        int tag;
    };

    SchemaDefinition def_;
    std::string tags_;
    std::vector<Block> blocks_;
    std::vector<Extra> extras_;
    DfaTable dfa_;
    ClassGrammar grammar_;
};

struct ValidateOptions {
    /// Enumeration bound for the grammar-alignment check.
    std::size_t max_length = 6;
};

/// Checks the six validity conditions; an empty result means valid.
std::vector<std::string> validate_schema(const LanguageSchema& schema, const ValidateOptions& opts = {});

/// Parses the JSON schema format. `origin` labels error messages.
SchemaDefinition parse_schema_definition(std::string_view json_text, std::string_view origin = "<memory>");
std::string schema_definition_to_json(const SchemaDefinition& def);

/// Parse, compile and validate; throws ValidationError listing every violation.
LanguageSchema load_schema(const std::filesystem::path& path);
LanguageSchema load_schema_text(std::string_view json_text, std::string_view origin = "<memory>");

/// Resolves "sinhala" to <dir>/sinhala.schema.json using WWHO_SCHEMA_DIR, then the
/// bundled directory. Arguments that name an existing file are returned as-is.
std::filesystem::path resolve_schema_path(std::string_view name_or_path);

std::string format_range(const CodepointRange& r);

} // namespace wwho
