#include "wwho/evalkit.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <unicode/uchar.h>

#include "wwho/error.hpp"
#include "wwho/linguistrie.hpp"
#include "wwho/router.hpp"
#include "wwho/utf8.hpp"

namespace wwho {

double twr(std::uint64_t tokens, std::uint64_t words) {
    if (words == 0) throw RangeError("twr: word count is zero");
    return static_cast<double>(tokens) / static_cast<double>(words);
}

double cpt(std::uint64_t chars, std::uint64_t tokens) {
    if (tokens == 0) throw RangeError("cpt: token count is zero");
    return static_cast<double>(chars) / static_cast<double>(tokens);
}

double capacity_multiplier(std::uint64_t tokens_baseline, std::uint64_t tokens_sgpe) {
    if (tokens_sgpe == 0) throw RangeError("capacity_multiplier: SGPE token count is zero");
    return static_cast<double>(tokens_baseline) / static_cast<double>(tokens_sgpe);
}

double reduction_pct(std::uint64_t tokens_baseline, std::uint64_t tokens_sgpe) {
    if (tokens_baseline == 0) throw RangeError("reduction_pct: baseline token count is zero");
    return 100.0 * (1.0 - static_cast<double>(tokens_sgpe) / static_cast<double>(tokens_baseline));
}

namespace {

bool is_separator(char32_t cp, const WordCountOptions& opts) {
    if (opts.danda_splits_words && (cp == 0x0964 || cp == 0x0965)) return true;
    return u_isUWhiteSpace(static_cast<UChar32>(cp)) != 0;
}

/// Splits [0, n) into contiguous chunks, runs fn(i, acc) per index on its own
/// accumulator, and merges accumulators in chunk order.
template <class Acc, class Fn>
Acc parallel_reduce(std::size_t n, unsigned threads, Fn fn) {
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
    std::vector<Acc> parts(workers);
    auto run = [&](std::size_t w) {
        const std::size_t lo = n * w / workers;
        const std::size_t hi = n * (w + 1) / workers;
        for (std::size_t i = lo; i < hi; ++i) fn(i, parts[w]);
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::exception_ptr> errors(workers);
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    run(w);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    Acc total;
    for (auto& p : parts) total.merge(p);
    return total;
}

int owning_script(char32_t cp, std::span<const LanguageSchema> schemas) {
    int s = script_of(cp, schemas);
    if (s != kOtherScript) return s;
    for (std::size_t i = 0; i < schemas.size(); ++i)
        if (schemas[i].is_joiner(cp)) return static_cast<int>(i);
    return kOtherScript;
}

bool token_offends(std::u32string_view cps, std::span<const LanguageSchema> schemas) {
    if (cps.size() == 1) {
        const int s = owning_script(cps[0], schemas);
        if (s == kOtherScript) return false;
        const auto& schema = schemas[static_cast<std::size_t>(s)];
        const ClassTag tag = schema.classify(cps[0]);
        if (!schema.is_joiner(cps[0]) && tag != 'H' && tag != 'Z') return false;
        auto syl = syllabify(cps, schema);
        return !(syl.size() == 1 && syl[0].kind == SyllableKind::kOrphan);
    }
    std::u32string_view body = cps;
    if (body.front() == U' ') body.remove_prefix(1);
    if (body.empty()) return true;
    const int s = script_of(body.front(), schemas);
    if (s == kOtherScript) return true;
    const auto& schema = schemas[static_cast<std::size_t>(s)];
    for (const auto& syl : syllabify(body, schema)) {
        if (syl.kind != SyllableKind::kSyllable || syl.space_prefixed) return true;
        std::string tags;
        for (char32_t cp : syl.text) tags.push_back(schema.classify(cp));
        if (!schema.grammar().matches(tags)) return true;
    }
    return false;
}

} // namespace

std::size_t word_count(std::u32string_view text, const WordCountOptions& opts) {
    std::size_t words = 0;
    bool in_word = false;
    for (char32_t cp : text) {
        if (is_separator(cp, opts)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++words;
        }
    }
    return words;
}

std::size_t word_count(std::string_view utf8, const WordCountOptions& opts) {
    return word_count(std::u32string_view(decode_utf8(utf8)), opts);
}

std::vector<std::string> glitch_audit(const SgpeModel& model, std::span<const LanguageSchema> schemas) {
    std::vector<std::string> out;
    for (std::size_t id = 0; id < model.size(); ++id) {
        if (id == SgpeModel::kUnkId || id == SgpeModel::kSpaceId) continue;
        const std::string& tok = model.vocab()[id];
        if (token_offends(decode_utf8(tok), schemas)) out.push_back(tok);
    }
    return out;
}

bool align_unk(std::u32string_view original, std::u32string_view decoded, std::uint64_t* unk_chars) {
    static const std::u32string kUnk = U"[UNK]";
    if (original == decoded) {
        if (unk_chars) *unk_chars = 0;
        return true;
    }
    std::vector<std::u32string_view> pieces;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t hit = decoded.find(kUnk, pos);
        pieces.push_back(decoded.substr(pos, hit == std::u32string_view::npos ? std::u32string_view::npos : hit - pos));
        if (hit == std::u32string_view::npos) break;
        pos = hit + kUnk.size();
    }
    if (pieces.size() == 1) return false;

    std::uint64_t literal = 0;
    for (auto p : pieces) literal += p.size();
    if (literal >= original.size()) return false;
    if (!original.starts_with(pieces.front()) || !original.ends_with(pieces.back())) return false;

    // Leftmost placement of each middle piece leaves the most room for the rest.
    std::size_t cursor = pieces.front().size();
    const std::size_t tail_start = original.size() - pieces.back().size();
    for (std::size_t i = 1; i + 1 < pieces.size(); ++i) {
        const std::size_t hit = original.find(pieces[i], cursor + 1);
        if (hit == std::u32string_view::npos) return false;
        cursor = hit + pieces[i].size();
    }
    if (tail_start < cursor + 1) return false;
    if (unk_chars) *unk_chars = original.size() - literal;
    return true;
}

namespace {

struct RoundtripAcc {
    std::size_t lines = 0, mismatches = 0;
    std::uint64_t chars = 0, unk = 0;
    void merge(const RoundtripAcc& o) {
        lines += o.lines;
        mismatches += o.mismatches;
        chars += o.chars;
        unk += o.unk;
    }
};

struct CountAcc {
    std::size_t n = 0;
    void merge(const CountAcc& o) { n += o.n; }
};

struct UsageAcc {
    std::vector<char> seen;
    void merge(const UsageAcc& o) {
        if (seen.size() < o.seen.size()) seen.resize(o.seen.size(), 0);
        for (std::size_t i = 0; i < o.seen.size(); ++i) seen[i] |= o.seen[i];
    }
};

} // namespace

RoundtripResult roundtrip_audit(const MetaTokenizer& tok, std::span<const std::string> lines, unsigned threads) {
    auto acc = parallel_reduce<RoundtripAcc>(lines.size(), threads, [&](std::size_t i, RoundtripAcc& a) {
        const std::u32string original = decode_utf8(lines[i]);
        const std::u32string decoded = decode_utf8(tok.decode(tok.encode(lines[i])));
        std::uint64_t unk = 0;
        ++a.lines;
        a.chars += original.size();
        if (align_unk(original, decoded, &unk))
            a.unk += unk;
        else
            ++a.mismatches;
    });
    RoundtripResult r;
    r.lines = acc.lines;
    r.mismatches = acc.mismatches;
    r.total_chars = acc.chars;
    r.unk_chars = acc.unk;
    r.unk_loss_rate = acc.chars == 0 ? 0.0 : 100.0 * static_cast<double>(acc.unk) / static_cast<double>(acc.chars);
    return r;
}

double ascii_stress_test(const MetaTokenizer& tok, std::span<const std::string> lines, unsigned threads) {
    for (std::size_t i = 0; i < lines.size(); ++i)
        if (!is_ascii(lines[i]))
            throw ValidationError("ascii_stress_test: line " + std::to_string(i + 1) + " contains non-ASCII text");
    if (lines.empty()) return 0.0;
    auto acc = parallel_reduce<CountAcc>(lines.size(), threads, [&](std::size_t i, CountAcc& a) {
        if (tok.encode(lines[i]) != tok.foundation().encode(lines[i])) ++a.n;
    });
    return 100.0 * static_cast<double>(acc.n) / static_cast<double>(lines.size());
}

VocabUsage vocab_utilization(const MetaTokenizer& tok, std::span<const std::string> lines, unsigned threads) {
    const std::size_t n = tok.sgpe().size();
    auto acc = parallel_reduce<UsageAcc>(lines.size(), threads, [&](std::size_t i, UsageAcc& a) {
        if (a.seen.empty()) a.seen.assign(n, 0);
        for (TokenId id : tok.encode(lines[i]))
            if (id >= tok.offset()) a.seen[id - tok.offset()] = 1;
    });
    VocabUsage u;
    u.used = static_cast<std::size_t>(std::count(acc.seen.begin(), acc.seen.end(), 1));
    u.unused = n - u.used;
    return u;
}

const char* to_string(BucketBy b) noexcept {
    return b == BucketBy::kFile ? "file" : "token-script";
}

BucketBy parse_bucket_by(std::string_view s) {
    if (s == "file") return BucketBy::kFile;
    if (s == "token-script") return BucketBy::kTokenScript;
    throw ValidationError("unknown bucket mode: " + std::string(s));
}

BaselineCounts parse_baseline_counts(std::string_view text, std::string name) {
    BaselineCounts out{std::move(name), {}};
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        std::string bucket, extra;
        long long count = -1;
        if (!(fields >> bucket)) continue;
        if (!(fields >> count) || count < 0 || (fields >> extra))
            throw ParseError("baseline counts line " + std::to_string(lineno) + ": expected '<bucket> <count>'");
        if (!out.counts.emplace(bucket, static_cast<std::uint64_t>(count)).second)
            throw ParseError("baseline counts line " + std::to_string(lineno) + ": duplicate bucket " + bucket);
    }
    return out;
}

namespace {

struct BucketAcc {
    std::uint64_t tokens = 0, words = 0, chars = 0;
};

struct EvalAcc {
    std::map<std::string, BucketAcc> buckets;
    BucketAcc overall;
    RoundtripAcc rt;
    void merge(const EvalAcc& o) {
        for (const auto& [k, v] : o.buckets) {
            auto& b = buckets[k];
            b.tokens += v.tokens;
            b.words += v.words;
            b.chars += v.chars;
        }
        overall.tokens += o.overall.tokens;
        overall.words += o.overall.words;
        overall.chars += o.overall.chars;
        rt.merge(o.rt);
    }
};

BucketStats finish(std::string name, const BucketAcc& a) {
    BucketStats s;
    s.name = std::move(name);
    s.total_tokens = a.tokens;
    s.total_words = a.words;
    s.total_chars = a.chars;
    s.twr = a.words ? twr(a.tokens, a.words) : 0.0;
    s.cpt = a.tokens ? cpt(a.chars, a.tokens) : 0.0;
    return s;
}

void attach_baselines(BucketStats& s, const std::vector<BaselineCounts>& baselines, bool overall,
                      const std::vector<BucketStats>& buckets) {
    for (const auto& b : baselines) {
        std::uint64_t base = 0;
        if (auto it = b.counts.find(s.name); it != b.counts.end()) {
            base = it->second;
        } else if (overall) {
            bool all = !buckets.empty();
            for (const auto& bk : buckets) {
                auto jt = b.counts.find(bk.name);
                if (jt == b.counts.end()) {
                    all = false;
                    break;
                }
                base += jt->second;
            }
            if (!all) continue;
        } else {
            continue;
        }
        if (base > 0) s.reduction_vs[b.name] = reduction_pct(base, s.total_tokens);
        if (s.total_tokens > 0) s.capacity_vs[b.name] = capacity_multiplier(base, s.total_tokens);
    }
}

} // namespace

EvalReport evaluate(const MetaTokenizer& tok, std::span<const EvalInput> inputs, const EvalOptions& opts) {
    struct LineRef {
        const std::string* text;
        const std::string* label;
    };
    std::vector<LineRef> refs;
    std::vector<std::string> order;
    for (const auto& in : inputs) {
        if (opts.bucket_by == BucketBy::kFile && std::find(order.begin(), order.end(), in.label) == order.end())
            order.push_back(in.label);
        for (const auto& l : in.lines) refs.push_back({&l, &in.label});
    }
    const auto schemas = tok.schemas();
    if (opts.bucket_by == BucketBy::kTokenScript) {
        for (const auto& s : schemas) order.push_back(s.name());
        order.push_back("other");
    }

    auto acc = parallel_reduce<EvalAcc>(refs.size(), opts.threads, [&](std::size_t i, EvalAcc& a) {
        const std::u32string cps = decode_utf8(*refs[i].text);
        std::uint64_t line_tokens = 0;
        for (const auto& seg : route(cps, schemas)) {
            std::size_t n = 0;
            if (seg.is_other()) {
                n = tok.foundation().encode(encode_utf8(seg.text)).size();
            } else {
                auto syl = syllabify(seg.text, schemas[static_cast<std::size_t>(seg.script)]);
                n = tok.sgpe().encode(syl).size();
            }
            line_tokens += n;
            if (opts.bucket_by == BucketBy::kTokenScript) {
                auto& b = a.buckets[seg.is_other() ? "other" : schemas[static_cast<std::size_t>(seg.script)].name()];
                b.tokens += n;
                b.chars += seg.text.size();
                b.words += word_count(std::u32string_view(seg.text), opts.words);
            }
        }
        const std::uint64_t words = word_count(std::u32string_view(cps), opts.words);
        if (opts.bucket_by == BucketBy::kFile) {
            auto& b = a.buckets[*refs[i].label];
            b.tokens += line_tokens;
            b.words += words;
            b.chars += cps.size();
        }
        a.overall.tokens += line_tokens;
        a.overall.words += words;
        a.overall.chars += cps.size();

        std::uint64_t unk = 0;
        ++a.rt.lines;
        a.rt.chars += cps.size();
        if (align_unk(cps, decode_utf8(tok.decode(tok.encode(*refs[i].text))), &unk))
            a.rt.unk += unk;
        else
            ++a.rt.mismatches;
    });

    EvalReport r;
    for (const auto& name : order) {
        auto it = acc.buckets.find(name);
        r.buckets.push_back(finish(name, it == acc.buckets.end() ? BucketAcc{} : it->second));
    }
    for (auto& b : r.buckets) attach_baselines(b, opts.baselines, false, r.buckets);
    r.overall = finish("overall", acc.overall);
    attach_baselines(r.overall, opts.baselines, true, r.buckets);

    std::vector<std::string> all_lines;
    all_lines.reserve(refs.size());
    for (const auto& ref : refs) all_lines.push_back(*ref.text);
    r.glitch_count = glitch_audit(tok.sgpe(), schemas).size();
    r.unused_vocab_count = vocab_utilization(tok, all_lines, opts.threads).unused;
    r.roundtrip_mismatches = acc.rt.mismatches;
    r.unk_loss_rate = acc.rt.chars == 0 ? 0.0 : 100.0 * static_cast<double>(acc.rt.unk) / static_cast<double>(acc.rt.chars);
    return r;
}

namespace {

nlohmann::ordered_json bucket_json(const BucketStats& b) {
    nlohmann::ordered_json j;
    j["name"] = b.name;
    j["total_tokens"] = b.total_tokens;
    j["total_words"] = b.total_words;
    j["total_chars"] = b.total_chars;
    j["twr"] = b.twr;
    j["cpt"] = b.cpt;
    j["reduction_vs"] = b.reduction_vs;
    j["capacity_vs"] = b.capacity_vs;
    return j;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

} // namespace

std::string EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["buckets"] = nlohmann::ordered_json::array();
    for (const auto& b : buckets) j["buckets"].push_back(bucket_json(b));
    j["overall"] = bucket_json(overall);
    j["glitch_count"] = glitch_count;
    j["unused_vocab_count"] = unused_vocab_count;
    j["roundtrip_mismatches"] = roundtrip_mismatches;
    j["unk_loss_rate"] = unk_loss_rate;
    return j.dump(2) + "\n";
}

std::string EvalReport::to_table() const {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"Bucket", "Tokenizer", "Tokens", "Words", "Chars", "TWR", "CPT", "% Reduction", "Capacity"});
    auto emit = [&](const BucketStats& b) {
        rows.push_back({b.name, "SGPE", std::to_string(b.total_tokens), std::to_string(b.total_words),
                        std::to_string(b.total_chars), fixed(b.twr, 3), fixed(b.cpt, 3), "-", "-"});
        for (const auto& [name, red] : b.reduction_vs) {
            auto cap = b.capacity_vs.find(name);
            rows.push_back({"", name, "", "", "", "", "", fixed(red, 1) + "%",
                            cap == b.capacity_vs.end() ? "-" : fixed(cap->second, 2) + "x"});
        }
    };
    for (const auto& b : buckets) emit(b);
    emit(overall);

    std::vector<std::size_t> width(rows.front().size(), 0);
    for (const auto& r : rows)
        for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], decode_utf8(r[c]).size());
    std::string out;
    for (const auto& r : rows) {
        std::string line;
        for (std::size_t c = 0; c < r.size(); ++c) {
            const std::size_t pad = width[c] - decode_utf8(r[c]).size();
            if (c < 2) line += r[c] + std::string(pad, ' ');
            else line += std::string(pad, ' ') + r[c];
            if (c + 1 < r.size()) line += "  ";
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out += line + "\n";
    }
    out += "glitch tokens: " + std::to_string(glitch_count) + "\n";
    out += "unused SGPE vocab: " + std::to_string(unused_vocab_count) + "\n";
    out += "round-trip mismatches: " + std::to_string(roundtrip_mismatches) + "\n";
    out += "UNK loss rate: " + fixed(unk_loss_rate, 4) + "%\n";
    return out;
}

} // namespace wwho
