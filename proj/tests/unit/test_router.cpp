#include <gtest/gtest.h>

#include "corpus.hpp"
#include "test_env.hpp"
#include "wwho/router.hpp"
#include "wwho/utf8.hpp"

using namespace wwho;
using wwho::testing::both_schemas;

namespace {

constexpr int kSinhala = 0;
constexpr int kDevanagari = 1;

std::vector<Segment> route8(const std::string& s) {
    return route(decode_utf8(s), both_schemas());
}

Segment seg(int script, const std::string& text, bool space = false) {
    return Segment{script, decode_utf8(text), space, 0};
}

void expect_segments(const std::vector<Segment>& got, const std::vector<Segment>& want) {
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].script, want[i].script) << i;
        EXPECT_EQ(encode_utf8(got[i].text), encode_utf8(want[i].text)) << i;
        EXPECT_EQ(got[i].leading_space, want[i].leading_space) << i;
    }
}

} // namespace

TEST(Router, HardScriptBoundaryWithoutWhitespace) {
    expect_segments(route8("ඇpple"), {seg(kSinhala, "ඇ"), seg(kOtherScript, "pple")});
}

TEST(Router, LeadingSpaceMovesIntoAbugidaRun) {
    expect_segments(route8("ඔයා 1 special अद्भुत"), {seg(kSinhala, "ඔයා"), seg(kOtherScript, " 1 special"),
                                                      seg(kDevanagari, " अद्भुत", true)});
}

TEST(Router, SingleScriptInput) {
    expect_segments(route8("hello world"), {seg(kOtherScript, "hello world")});
}

TEST(Router, JoinerBetweenSameScriptStaysInside) {
    auto s = route(U"ක‍ක", both_schemas());
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].script, kSinhala);
    EXPECT_EQ(s[0].text.size(), 3u);
}

TEST(Router, JoinerRules) {
    // Trailing joiner after Sinhala stays Sinhala.
    expect_segments(route(U"ක්‍x", both_schemas()),
                    {Segment{kSinhala, U"ක්‍"}, Segment{kOtherScript, U"x"}});
    // Leading joiner before Devanagari adopts the following script.
    expect_segments(route(U"x‌क", both_schemas()),
                    {Segment{kOtherScript, U"x"}, Segment{kDevanagari, U"‌क"}});
    // ZWNJ is not a Sinhala joiner, so it does not stick to Sinhala.
    expect_segments(route(U"ක‌x", both_schemas()),
                    {Segment{kSinhala, U"ක"}, Segment{kOtherScript, U"‌x"}});
    // Joiner between ASCII stays OTHER.
    expect_segments(route(U"a‍b", both_schemas()), {Segment{kOtherScript, U"a‍b"}});
}

TEST(Router, OnlyOneSpaceAbsorbed) {
    expect_segments(route8("a   ක"), {seg(kOtherScript, "a  "), seg(kSinhala, " ක", true)});
    expect_segments(route8(" ක"), {seg(kSinhala, " ක", true)});
    expect_segments(route8("\tක"), {seg(kOtherScript, "\t"), seg(kSinhala, "ක")});
}

TEST(Router, SpaceBetweenScriptsWithoutOther) {
    expect_segments(route8("ක क"), {seg(kSinhala, "ක"), seg(kDevanagari, " क", true)});
}

TEST(Router, SpaceBeforeOtherNotFlagged) {
    expect_segments(route8("ක abc"), {seg(kSinhala, "ක"), seg(kOtherScript, " abc")});
}

TEST(Router, ScriptOf) {
    EXPECT_EQ(script_of(0x0D85, both_schemas()), kSinhala);
    EXPECT_EQ(script_of(0x0964, both_schemas()), kDevanagari);
    EXPECT_EQ(script_of(0x0965, both_schemas()), kDevanagari);
    EXPECT_EQ(script_of(U'A', both_schemas()), kOtherScript);
    EXPECT_EQ(script_name(kSinhala, both_schemas()), "sinhala");
    EXPECT_EQ(script_name(kOtherScript, both_schemas()), "OTHER");
}

TEST(Router, EmptyInput) {
    EXPECT_TRUE(route(U"", both_schemas()).empty());
}

TEST(Router, AsciiIsOneOtherSegment) {
    wwho::testing::Rng rng(7);
    for (const auto& line : wwho::testing::ascii_sentences(rng, 500)) {
        auto s = route8(line);
        if (line.empty()) continue;
        ASSERT_EQ(s.size(), 1u) << line;
        EXPECT_TRUE(s[0].is_other());
        EXPECT_EQ(encode_utf8(s[0].text), line);
    }
}

TEST(Router, FuzzLosslessIdempotentLinear) {
    wwho::testing::Rng rng(11);
    std::vector<SchemaDefinition> defs{wwho::testing::sinhala().definition(), wwho::testing::devanagari().definition()};
    for (int iter = 0; iter < 3000; ++iter) {
        std::u32string text;
        for (int k = 0; k < 4; ++k) text += wwho::testing::fuzz_segment(rng, defs[rng() % 2], 12);
        RouteStats stats;
        auto segs = route(text, both_schemas(), &stats);
        EXPECT_LE(stats.lookups, 2 * text.size() + 2);
        std::u32string joined;
        std::size_t expected_offset = 0;
        for (const auto& s : segs) {
            ASSERT_FALSE(s.text.empty());
            EXPECT_EQ(s.offset, expected_offset);
            expected_offset += s.text.size();
            joined += s.text;
            auto again = route(s.text, both_schemas());
            ASSERT_EQ(again.size(), 1u);
            EXPECT_EQ(again[0].script, s.script);
            EXPECT_EQ(again[0].text, s.text);
            if (!s.is_other()) {
                for (std::size_t i = s.leading_space ? 1 : 0; i < s.text.size(); ++i) {
                    const int owner = script_of(s.text[i], both_schemas());
                    ASSERT_TRUE(owner == s.script ||
                                (owner == kOtherScript && both_schemas()[s.script].is_joiner(s.text[i])));
                }
            }
        }
        ASSERT_EQ(joined, text);
    }
}
