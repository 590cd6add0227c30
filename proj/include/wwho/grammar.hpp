#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wwho {

/// Regular expression over single-letter class tags.
///
/// The dialect is deliberately tiny: tags are uppercase ASCII letters, and the
/// only operators are grouping `( )`, alternation `|`, and the postfix
/// quantifiers `?` and `*`. Whitespace is ignored. Matching is a Thompson NFA
/// simulation, so it is linear in the input and never backtracks.
class ClassGrammar {
public:
    /// Throws ParseError with the offending column on malformed patterns.
    static ClassGrammar compile(std::string_view pattern);

    /// True iff the whole tag string is in the language.
    bool matches(std::string_view tags) const;

    /// Length of the longest prefix of `tags` in the language, if any.
    std::optional<std::size_t> longest_prefix(std::string_view tags) const;

    const std::string& pattern() const noexcept { return pattern_; }

    /// Distinct tags mentioned by the pattern, in first-appearance order.
    const std::string& alphabet() const noexcept { return alphabet_; }

private:
    enum class Op : unsigned char { kTag, kSplit, kMatch };
    struct Node {
        Op op;
        char tag = 0;
        int out = -1;
        int out2 = -1;
    };

    void add_closure(std::vector<int>& set, std::vector<unsigned>& mark, unsigned gen, int s) const;

    std::string pattern_;
    std::string alphabet_;
    std::vector<Node> nodes_;
    int start_ = -1;

    friend class GrammarBuilder;
};

} // namespace wwho
