#include <cmath>
#include <set>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "corpus.hpp"
#include "test_env.hpp"
#include "wwho/error.hpp"
#include "wwho/evalkit.hpp"
#include "wwho/utf8.hpp"

using namespace wwho;
using wwho::testing::both_schemas;

namespace {

MetaTokenizer build(const std::vector<std::string>& lines, TrainOptions opts) {
    SgpeTrainer t(both_schemas(), opts);
    t.add_lines(lines);
    return MetaTokenizer(byte_fallback(), t.train(), both_schemas());
}

std::vector<SchemaDefinition> defs() {
    return {wwho::testing::sinhala().definition(), wwho::testing::devanagari().definition()};
}

} // namespace

TEST(Metrics, TokenWordRatio) {
    EXPECT_DOUBLE_EQ(twr(10, 10), 1.0);
    EXPECT_DOUBLE_EQ(twr(3, 2), 1.5);
    EXPECT_THROW(twr(3, 0), RangeError);
    // Table-scale magnitude: 6,654,288 tokens at TWR 1.274 implies about 5.22M words.
    EXPECT_NEAR(twr(6654288, 5223146), 1.274, 0.0005);
}

TEST(Metrics, CharsPerToken) {
    EXPECT_DOUBLE_EQ(cpt(10, 4), 2.5);
    EXPECT_THROW(cpt(1, 0), RangeError);
}

TEST(Metrics, CapacityAndReduction) {
    EXPECT_NEAR(capacity_multiplier(29152698, 6654288), 4.38, 0.005);
    EXPECT_NEAR(capacity_multiplier(17360196, 6654288), 2.61, 0.005);
    EXPECT_DOUBLE_EQ(capacity_multiplier(7, 7), 1.0);
    EXPECT_THROW(capacity_multiplier(7, 0), RangeError);
    EXPECT_NEAR(reduction_pct(17360196, 6654288), 61.7, 0.05);
    EXPECT_NEAR(reduction_pct(18394075, 13433554), 27.0, 0.05);
    EXPECT_DOUBLE_EQ(reduction_pct(9, 9), 0.0);
    EXPECT_THROW(reduction_pct(0, 9), RangeError);
    for (auto [b, s] : {std::pair<std::uint64_t, std::uint64_t>{100, 37}, {17360196, 6654288}, {5, 9}}) {
        EXPECT_NEAR(reduction_pct(b, s), 100.0 * (1.0 - 1.0 / capacity_multiplier(b, s)), 1e-9);
    }
}

TEST(Metrics, WordCount) {
    EXPECT_EQ(word_count("a b  c"), 3u);
    EXPECT_EQ(word_count(""), 0u);
    EXPECT_EQ(word_count("ශ්‍රී ලංකාව"), 2u);
    EXPECT_EQ(word_count("  lead\ttab nbsp  "), 3u);
    EXPECT_EQ(word_count("है।वह"), 1u);
    EXPECT_EQ(word_count("है।वह", {.danda_splits_words = true}), 2u);
    EXPECT_EQ(word_count("है ।", {.danda_splits_words = true}), 1u);
}

TEST(GlitchAudit, TrainedModelIsClean) {
    wwho::testing::Rng rng(12);
    auto lines = wwho::testing::mixed_corpus(rng, defs(), 40000);
    auto tok = build(lines, {.vocab_size = 3000, .prune_threshold = 1});
    EXPECT_TRUE(glitch_audit(tok.sgpe(), both_schemas()).empty());
}

TEST(GlitchAudit, JoinerGlitchFound) {
    auto m = SgpeModel::from_parts({"[UNK]", " ", "ක්‍", "ක", " කා"}, {}, 1, PruneScope::kAll,
                                   {"sinhala", "devanagari"});
    EXPECT_EQ(glitch_audit(m, both_schemas()), std::vector<std::string>{"ක්‍"});
}

TEST(GlitchAudit, SingleSyllablesAreClean) {
    auto m = SgpeModel::from_parts({"[UNK]", " ", "ක", "කා", " ගේ", "क्ष", "्", "‍", "/", "\t"}, {}, 1,
                                   PruneScope::kAll, {"sinhala", "devanagari"});
    EXPECT_TRUE(glitch_audit(m, both_schemas()).empty());
}

TEST(GlitchAudit, OtherOffenders) {
    auto m = SgpeModel::from_parts({"[UNK]", " ", "ක ග", "කිි", "ab", "  "}, {}, 1, PruneScope::kAll,
                                   {"sinhala", "devanagari"});
    // "ක ග" spans a word boundary, "කිි" has a stray sign, "ab" is not Abugida, "  " is two spaces.
    EXPECT_EQ(glitch_audit(m, both_schemas()), (std::vector<std::string>{"ක ග", "කිි", "ab", "  "}));
}

TEST(UnkAlignment, Cases) {
    std::uint64_t n = 0;
    EXPECT_TRUE(align_unk(U"abc", U"abc", &n));
    EXPECT_EQ(n, 0u);
    EXPECT_TRUE(align_unk(U"xකැy", U"x[UNK]y", &n));
    EXPECT_EQ(n, 2u);
    EXPECT_TRUE(align_unk(U"ක ග ච", U"[UNK] ග[UNK]", &n));
    EXPECT_EQ(n, 3u);
    EXPECT_FALSE(align_unk(U"ab", U"a[UNK]b", &n));
    EXPECT_FALSE(align_unk(U"abc", U"abd", &n));
    EXPECT_FALSE(align_unk(U"abc", U"a[UNK]d", &n));
    EXPECT_TRUE(align_unk(U"aXbYc", U"a[UNK]b[UNK]c", &n));
    EXPECT_EQ(n, 2u);
    EXPECT_FALSE(align_unk(U"aXbc", U"a[UNK]b[UNK]c", &n));
}

TEST(RoundtripAudit, ThetaOneIsExact) {
    wwho::testing::Rng rng(13);
    auto lines = wwho::testing::mixed_corpus(rng, defs(), 40000);
    auto tok = build(lines, {.vocab_size = wwho::testing::base_vocab(lines, 1) + 1000, .prune_threshold = 1});
    auto r = roundtrip_audit(tok, lines, 3);
    EXPECT_EQ(r.mismatches, 0u);
    EXPECT_EQ(r.unk_chars, 0u);
    EXPECT_DOUBLE_EQ(r.unk_loss_rate, 0.0);
    EXPECT_EQ(r.lines, lines.size());
}

TEST(RoundtripAudit, OnePrunedSyllableIn3750Chars) {
    // 1249 lines of "කා " plus one line holding a rare three-codepoint syllable.
    std::vector<std::string> lines(1249, "කා ");
    lines.push_back("ක්ෂ");
    ASSERT_EQ(wwho::testing::codepoints(lines), 3750u);
    auto tok = build(lines, {.vocab_size = 50, .prune_threshold = 2});
    auto r = roundtrip_audit(tok, lines);
    EXPECT_EQ(r.mismatches, 0u);
    EXPECT_EQ(r.total_chars, 3750u);
    EXPECT_EQ(r.unk_chars, 3u);
    EXPECT_NEAR(r.unk_loss_rate, 0.08, 1e-12);
}

namespace {

// Foundation whose decode drops the last byte of every run.
class LossyFoundation final : public FoundationTokenizer {
public:
    std::vector<TokenId> encode(std::string_view text) const override { return byte_fallback()->encode(text); }
    std::string decode(std::span<const TokenId> ids) const override {
        std::string s = byte_fallback()->decode(ids);
        if (!s.empty()) s.pop_back();
        return s;
    }
    std::string token_bytes(TokenId id) const override { return byte_fallback()->token_bytes(id); }
    std::size_t vocab_size() const noexcept override { return 256; }
    const FoundationDescriptor& descriptor() const noexcept override { return byte_fallback()->descriptor(); }
};

} // namespace

TEST(RoundtripAudit, InjectedDecodeFaultDetected) {
    auto good = build(std::vector<std::string>(10, "කම ගම"), {.vocab_size = 100, .prune_threshold = 1});
    MetaTokenizer lossy(std::make_shared<LossyFoundation>(), good.sgpe(), both_schemas());
    std::vector<std::string> lines{"කම ගම", "කම abc ගම", "xyz"};
    EXPECT_EQ(roundtrip_audit(good, lines).mismatches, 0u);
    EXPECT_EQ(roundtrip_audit(lossy, lines).mismatches, 2u);
}

TEST(AsciiStress, Identity) {
    wwho::testing::Rng rng(14);
    auto lines = wwho::testing::ascii_sentences(rng, 3000);
    auto tok = build({"ක ග", "ක ග"}, {.vocab_size = 50, .prune_threshold = 1});
    EXPECT_DOUBLE_EQ(ascii_stress_test(tok, lines, 2), 0.0);
    EXPECT_DOUBLE_EQ(ascii_stress_test(tok, std::vector<std::string>{}), 0.0);
    lines.push_back("ක");
    EXPECT_THROW(ascii_stress_test(tok, lines), ValidationError);
}

TEST(VocabUtilization, Counts) {
    std::vector<std::string> train{"කම ගම", "කම ගම", "ච"};
    auto tok = build(train, {.vocab_size = 100, .prune_threshold = 1});
    const std::size_t n = tok.sgpe().size();
    auto empty = vocab_utilization(tok, std::vector<std::string>{});
    EXPECT_EQ(empty.used, 0u);
    EXPECT_EQ(empty.unused, n);
    auto single = vocab_utilization(tok, std::vector<std::string>{"ච"});
    EXPECT_EQ(single.used, 1u);
    EXPECT_EQ(single.unused, n - 1);
    auto all = vocab_utilization(tok, train);
    std::set<TokenId> seen;
    for (const auto& l : train)
        for (TokenId id : tok.encode(l)) seen.insert(id);
    EXPECT_EQ(all.used, seen.size());
}

TEST(EvalReport, IdentitiesAndBaselines) {
    wwho::testing::Rng rng(15);
    auto si = wwho::testing::zipf_sentences(rng, wwho::testing::make_lexicon(rng, defs()[0], 200), 400);
    auto hi = wwho::testing::zipf_sentences(rng, wwho::testing::make_lexicon(rng, defs()[1], 200), 400);
    std::vector<std::string> all = si;
    all.insert(all.end(), hi.begin(), hi.end());
    auto tok = build(all, {.vocab_size = 1500, .prune_threshold = 1});
    std::vector<EvalInput> inputs{{"sinhala", si}, {"hindi", hi}};
    EvalOptions opts;
    opts.threads = 3;
    opts.baselines.push_back(parse_baseline_counts("# counts\nsinhala 90000\nhindi 80000\n", "o200k"));
    auto r = evaluate(tok, inputs, opts);
    ASSERT_EQ(r.buckets.size(), 2u);
    EXPECT_EQ(r.buckets[0].name, "sinhala");
    std::uint64_t tokens = 0;
    for (const auto& b : r.buckets) {
        EXPECT_DOUBLE_EQ(b.twr * static_cast<double>(b.total_words), static_cast<double>(b.total_tokens));
        EXPECT_DOUBLE_EQ(b.cpt * static_cast<double>(b.total_tokens), static_cast<double>(b.total_chars));
        tokens += b.total_tokens;
        EXPECT_EQ(b.reduction_vs.count("o200k"), 1u);
    }
    EXPECT_EQ(r.overall.total_tokens, tokens);
    EXPECT_NEAR(r.overall.reduction_vs.at("o200k"), reduction_pct(170000, tokens), 1e-12);
    EXPECT_EQ(r.glitch_count, 0u);
    EXPECT_EQ(r.roundtrip_mismatches, 0u);

    auto serial = evaluate(tok, inputs, EvalOptions{.baselines = opts.baselines});
    EXPECT_EQ(serial.to_json(), r.to_json());
    auto j = nlohmann::json::parse(r.to_json());
    EXPECT_EQ(j["overall"]["total_tokens"], tokens);
    EXPECT_NE(r.to_table().find("% Reduction"), std::string::npos);
}

TEST(EvalReport, TokenScriptBuckets) {
    auto tok = build({"ක ග", "क ग"}, {.vocab_size = 50, .prune_threshold = 1});
    std::vector<EvalInput> in{{"mixed", {"ක ග abc क"}}};
    auto r = evaluate(tok, in, EvalOptions{.bucket_by = BucketBy::kTokenScript});
    ASSERT_EQ(r.buckets.size(), 3u);
    EXPECT_EQ(r.buckets[0].name, "sinhala");
    EXPECT_EQ(r.buckets[0].total_tokens, 2u);
    EXPECT_EQ(r.buckets[1].name, "devanagari");
    EXPECT_EQ(r.buckets[1].total_tokens, 1u);
    EXPECT_EQ(r.buckets[2].name, "other");
    EXPECT_EQ(r.buckets[2].total_tokens, 4u);
    EXPECT_EQ(r.overall.total_tokens, 7u);
    EXPECT_EQ(r.overall.total_words, 4u);
}

TEST(EvalReport, BaselineParsing) {
    auto b = parse_baseline_counts("overall 12\n\n a 3 # note\n", "x");
    EXPECT_EQ(b.counts.at("overall"), 12u);
    EXPECT_EQ(b.counts.at("a"), 3u);
    EXPECT_THROW(parse_baseline_counts("a\n", "x"), ParseError);
    EXPECT_THROW(parse_baseline_counts("a 1\na 2\n", "x"), ParseError);
    EXPECT_THROW(parse_baseline_counts("a -1\n", "x"), ParseError);
    EXPECT_EQ(parse_bucket_by("token-script"), BucketBy::kTokenScript);
    EXPECT_THROW(parse_bucket_by("x"), ValidationError);
}
