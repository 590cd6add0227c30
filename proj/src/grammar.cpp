#include "wwho/grammar.hpp"

#include <utility>

#include "wwho/error.hpp"

namespace wwho {

// Recursive-descent parser that emits Thompson fragments directly.
class GrammarBuilder {
public:
    GrammarBuilder(ClassGrammar& g, std::string_view src) : g_(g), src_(src) {}

    void build() {
        Frag f = parse_alt();
        skip_ws();
        if (pos_ < src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
        int match = add({ClassGrammar::Op::kMatch});
        patch(f.dangling, match);
        g_.start_ = f.start;
    }

private:
    using Op = ClassGrammar::Op;

    // A dangling exit is encoded as node*2 + (0 = out, 1 = out2).
    struct Frag {
        int start;
        std::vector<int> dangling;
    };

    int add(ClassGrammar::Node n) {
        g_.nodes_.push_back(n);
        return static_cast<int>(g_.nodes_.size()) - 1;
    }

    void patch(const std::vector<int>& dangling, int target) {
        for (int d : dangling) {
            auto& node = g_.nodes_[static_cast<std::size_t>(d >> 1)];
            ((d & 1) ? node.out2 : node.out) = target;
        }
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("grammar column " + std::to_string(pos_ + 1) + ": " + what + " in \"" +
                         std::string(src_) + "\"");
    }

    void skip_ws() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t')) ++pos_;
    }

    bool peek(char c) {
        skip_ws();
        return pos_ < src_.size() && src_[pos_] == c;
    }

    Frag parse_alt() {
        Frag left = parse_seq();
        while (peek('|')) {
            ++pos_;
            Frag right = parse_seq();
            int s = add({Op::kSplit, 0, left.start, right.start});
            std::vector<int> d = std::move(left.dangling);
            d.insert(d.end(), right.dangling.begin(), right.dangling.end());
            left = {s, std::move(d)};
        }
        return left;
    }

    Frag parse_seq() {
        std::optional<Frag> acc;
        while (true) {
            skip_ws();
            if (pos_ >= src_.size() || src_[pos_] == '|' || src_[pos_] == ')') break;
            Frag f = parse_repeat();
            if (!acc) {
                acc = std::move(f);
            } else {
                patch(acc->dangling, f.start);
                acc->dangling = std::move(f.dangling);
            }
        }
        if (!acc) fail("empty expression");
        return std::move(*acc);
    }

    Frag parse_repeat() {
        Frag f = parse_atom();
        bool quantified = false;
        while (true) {
            if ((peek('?') || peek('*')) && quantified) fail("stacked quantifier");
            quantified = true;
            if (peek('?')) {
                ++pos_;
                int s = add({Op::kSplit, 0, f.start, -1});
                f.dangling.push_back(s * 2 + 1);
                f.start = s;
            } else if (peek('*')) {
                ++pos_;
                int s = add({Op::kSplit, 0, f.start, -1});
                patch(f.dangling, s);
                f = {s, {s * 2 + 1}};
            } else {
                return f;
            }
        }
    }

    Frag parse_atom() {
        skip_ws();
        if (pos_ >= src_.size()) fail("unexpected end of pattern");
        char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            Frag inner = parse_alt();
            if (!peek(')')) fail("missing ')'");
            ++pos_;
            return inner;
        }
        if (c >= 'A' && c <= 'Z') {
            ++pos_;
            if (g_.alphabet_.find(c) == std::string::npos) g_.alphabet_.push_back(c);
            int n = add({Op::kTag, c});
            return {n, {n * 2}};
        }
        fail("unsupported character '" + std::string(1, c) + "'");
    }

    ClassGrammar& g_;
    std::string_view src_;
    std::size_t pos_ = 0;
};

ClassGrammar ClassGrammar::compile(std::string_view pattern) {
    ClassGrammar g;
    g.pattern_ = std::string(pattern);
    GrammarBuilder(g, pattern).build();
    return g;
}

void ClassGrammar::add_closure(std::vector<int>& set, std::vector<unsigned>& mark, unsigned gen,
                               int s) const {
    if (s < 0 || mark[static_cast<std::size_t>(s)] == gen) return;
    mark[static_cast<std::size_t>(s)] = gen;
    const Node& n = nodes_[static_cast<std::size_t>(s)];
    switch (n.op) {
    case Op::kSplit:
        add_closure(set, mark, gen, n.out);
        add_closure(set, mark, gen, n.out2);
        break;
    default:
        set.push_back(s);
    }
}

std::optional<std::size_t> ClassGrammar::longest_prefix(std::string_view tags) const {
    std::vector<unsigned> mark(nodes_.size(), 0);
    unsigned gen = 1;
    std::vector<int> cur;
    std::vector<int> next;
    add_closure(cur, mark, gen, start_);

    std::optional<std::size_t> best;
    auto accepting = [&](const std::vector<int>& set) {
        for (int s : set) {
            if (nodes_[static_cast<std::size_t>(s)].op == Op::kMatch) return true;
        }
        return false;
    };
    if (accepting(cur)) best = 0;

    for (std::size_t i = 0; i < tags.size() && !cur.empty(); ++i) {
        ++gen;
        next.clear();
        for (int s : cur) {
            const Node& n = nodes_[static_cast<std::size_t>(s)];
            if (n.op == Op::kTag && n.tag == tags[i]) add_closure(next, mark, gen, n.out);
        }
        std::swap(cur, next);
        if (accepting(cur)) best = i + 1;
    }
    return best;
}

bool ClassGrammar::matches(std::string_view tags) const {
    auto p = longest_prefix(tags);
    return p && *p == tags.size();
}

} // namespace wwho
