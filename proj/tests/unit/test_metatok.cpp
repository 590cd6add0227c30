#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "corpus.hpp"
#include "test_env.hpp"
#include "wwho/error.hpp"
#include "wwho/metatok.hpp"
#include "wwho/utf8.hpp"

using namespace wwho;
using wwho::testing::both_schemas;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<const FoundationTokenizer> toy_foundation() {
    static auto f = load_rank_file(wwho::testing::data_dir() / "toy.tiktoken");
    return f;
}

MetaTokenizer build(const std::vector<std::string>& lines, TrainOptions opts,
                    std::shared_ptr<const FoundationTokenizer> f = toy_foundation()) {
    SgpeTrainer t(both_schemas(), opts);
    t.add_lines(lines);
    return MetaTokenizer(std::move(f), t.train(), both_schemas());
}

std::vector<std::string> strings(const MetaTokenizer& tok, const std::string& text) {
    std::vector<std::string> out;
    for (const auto& t : tok.token_strings(text)) out.push_back(t.text);
    return out;
}

const MetaTokenizer& trace_tokenizer() {
    static const MetaTokenizer tok = [] {
        std::vector<std::string> lines(120, "ඔයා 1 special अद्भुत");
        lines.insert(lines.end(), 110, "ශ්‍රී ලංකාව");
        return build(lines, {.vocab_size = 64, .prune_threshold = 100});
    }();
    return tok;
}

std::vector<SchemaDefinition> defs() {
    return {wwho::testing::sinhala().definition(), wwho::testing::devanagari().definition()};
}

fs::path temp(const std::string& name) {
    return fs::temp_directory_path() / ("wwho_meta_" + name);
}

} // namespace

TEST(MetaTokenizer, EndToEndTrace) {
    const auto& tok = trace_tokenizer();
    EXPECT_EQ(strings(tok, "ඔයා 1 special अद्भुत"),
              (std::vector<std::string>{"ඔයා", " ", "1", " special", " अद्भुत"}));
    auto info = tok.token_strings("ඔයා 1 special अद्भुत");
    EXPECT_EQ(info[0].space, IdSpace::kSgpe);
    EXPECT_EQ(info[0].script, 0);
    EXPECT_EQ(info[2].space, IdSpace::kBpe);
    EXPECT_EQ(info[4].script, 1);
    EXPECT_EQ(tok.decode(tok.encode("ඔයා 1 special अद्भुत")), "ඔයා 1 special अद्भुत");
}

TEST(MetaTokenizer, TableExampleTwoTokens) {
    auto info = trace_tokenizer().token_strings("ශ්‍රී ලංකාව");
    ASSERT_EQ(info.size(), 2u);
    EXPECT_EQ(info[0].text, "ශ්‍රී");
    EXPECT_EQ(info[1].text, " ලංකාව");
    EXPECT_EQ(info[0].space, IdSpace::kSgpe);
    EXPECT_EQ(info[1].space, IdSpace::kSgpe);
}

TEST(MetaTokenizer, MixedTokenSpaces) {
    const auto& tok = trace_tokenizer();
    auto a = tok.token_strings("a");
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].text, "a");
    EXPECT_EQ(a[0].space, IdSpace::kBpe);
    auto apple = tok.token_strings("ඇpple");
    ASSERT_GE(apple.size(), 2u);
    EXPECT_EQ(apple[0].space, IdSpace::kSgpe);
    for (std::size_t i = 1; i < apple.size(); ++i) EXPECT_EQ(apple[i].space, IdSpace::kBpe);
}

TEST(MetaTokenizer, EmptyAndUnknown) {
    const auto& tok = trace_tokenizer();
    EXPECT_TRUE(tok.encode("").empty());
    const std::vector<TokenId> unk{static_cast<TokenId>(tok.offset() + SgpeModel::kUnkId)};
    EXPECT_EQ(tok.decode(unk), "[UNK]");
    EXPECT_EQ(tok.encode("ක"), unk);
    EXPECT_EQ(tok.decode(toy_foundation()->encode("hi")), "hi");
    const std::vector<TokenId> bad{static_cast<TokenId>(tok.total_vocab_size())};
    EXPECT_THROW(tok.decode(bad), RangeError);
}

TEST(MetaTokenizer, AsciiIdentity) {
    const auto& tok = trace_tokenizer();
    wwho::testing::Rng rng(3);
    for (const auto& l : wwho::testing::ascii_sentences(rng, 2000)) ASSERT_EQ(tok.encode(l), toy_foundation()->encode(l));
}

TEST(MetaTokenizer, IdSpaceBijection) {
    const auto& tok = trace_tokenizer();
    const auto off = static_cast<TokenId>(tok.offset());
    const auto total = static_cast<TokenId>(tok.total_vocab_size());
    EXPECT_EQ(tok.total_vocab_size(), toy_foundation()->vocab_size() + tok.sgpe().size());
    for (TokenId id : {TokenId{0}, off - 1, off, total - 1}) {
        const IdSpace s = tok.space_of(id);
        EXPECT_EQ(s, id < off ? IdSpace::kBpe : IdSpace::kSgpe);
        EXPECT_EQ(tok.to_meta(s, tok.to_local(id)), id);
    }
    std::mt19937 rng(1);
    for (int i = 0; i < 5000; ++i) {
        const TokenId id = std::uniform_int_distribution<TokenId>(0, total - 1)(rng);
        EXPECT_EQ(tok.to_meta(tok.space_of(id), tok.to_local(id)), id);
    }
    EXPECT_THROW(tok.space_of(total), RangeError);
    EXPECT_THROW(tok.to_meta(IdSpace::kBpe, off), RangeError);
    EXPECT_THROW(tok.to_meta(IdSpace::kSgpe, static_cast<TokenId>(tok.sgpe().size())), RangeError);
    EXPECT_EQ(tok.to_meta(IdSpace::kSgpe, 0), off);
}

TEST(MetaTokenizer, RoundTripFuzzByteFallback) {
    wwho::testing::Rng rng(77);
    auto lines = wwho::testing::mixed_corpus(rng, defs(), 60000);
    auto tok = build(lines, {.vocab_size = wwho::testing::base_vocab(lines, 1) + 1000, .prune_threshold = 1},
                     byte_fallback());
    EXPECT_EQ(tok.offset(), 256u);
    for (const auto& l : lines) ASSERT_EQ(tok.decode(tok.encode(l)), l);
    for (const auto& l : wwho::testing::mixed_corpus(rng, defs(), 5000)) {
        auto ids = tok.encode(l);
        for (TokenId id : ids) ASSERT_LT(id, tok.total_vocab_size());
    }
}

TEST(MetaTokenizer, SaveLoadParity) {
    wwho::testing::Rng rng(78);
    auto lines = wwho::testing::mixed_corpus(rng, defs(), 30000);
    auto tok = build(lines, {.vocab_size = wwho::testing::base_vocab(lines, 2, PruneScope::kSyllables) + 600,
                             .prune_threshold = 2,
                             .prune_scope = PruneScope::kSyllables});
    const auto path = temp("tok.json");
    tok.save(path);
    auto back = MetaTokenizer::load(path);
    EXPECT_EQ(back.to_json(), tok.to_json());
    EXPECT_EQ(back.sgpe().prune_threshold(), 2);
    EXPECT_EQ(back.sgpe().prune_scope(), PruneScope::kSyllables);
    EXPECT_EQ(back.foundation().descriptor().sha256, tok.foundation().descriptor().sha256);
    for (const auto& l : wwho::testing::mixed_corpus(rng, defs(), 20000)) ASSERT_EQ(back.encode(l), tok.encode(l));
}

TEST(MetaTokenizer, LoadRejectsTampering) {
    const auto& tok = trace_tokenizer();
    const auto doc = nlohmann::ordered_json::parse(tok.to_json());
    auto reload = [](const nlohmann::ordered_json& d) { return MetaTokenizer::from_json(d.dump()); };
    EXPECT_NO_THROW(reload(doc));

    auto merges = doc;
    std::swap(merges["sgpe"]["merges"][0], merges["sgpe"]["merges"][1]);
    try {
        reload(merges);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos);
    }

    auto total = doc;
    total["meta"]["total_vocab_size"] = total["meta"]["total_vocab_size"].get<int>() + 1;
    EXPECT_THROW(reload(total), ValidationError);

    auto version = doc;
    version["version"] = 99;
    EXPECT_THROW(reload(version), ValidationError);

    auto hash = doc;
    hash["foundation"]["sha256"] = std::string(64, '0');
    EXPECT_THROW(reload(hash), ValidationError);

    EXPECT_THROW(MetaTokenizer::from_json("{"), ParseError);
    EXPECT_THROW(MetaTokenizer::from_json("{\"format\":\"other\"}"), ParseError);
}

TEST(MetaTokenizer, RelativeFoundationPathResolvesAgainstFile) {
    const fs::path dir = temp("reldir");
    fs::create_directories(dir);
    fs::copy_file(wwho::testing::data_dir() / "toy.tiktoken", dir / "toy.tiktoken", fs::copy_options::overwrite_existing);
    fs::copy_file(wwho::testing::data_dir() / "toy.tiktoken.config.json", dir / "toy.tiktoken.config.json",
                  fs::copy_options::overwrite_existing);
    auto doc = nlohmann::ordered_json::parse(trace_tokenizer().to_json());
    doc["foundation"]["rank_file"] = "toy.tiktoken";
    doc["foundation"]["config_file"] = "toy.tiktoken.config.json";
    std::ofstream(dir / "tok.json") << doc.dump();
    auto tok = MetaTokenizer::load(dir / "tok.json");
    EXPECT_EQ(tok.encode("ඔයා 1 special"), trace_tokenizer().encode("ඔයා 1 special"));
}

TEST(MetaTokenizer, ConstructorChecksSchemas) {
    auto model = trace_tokenizer().sgpe();
    std::vector<LanguageSchema> only_sinhala{wwho::testing::sinhala()};
    EXPECT_THROW(MetaTokenizer(toy_foundation(), model, only_sinhala), ValidationError);
    EXPECT_THROW(MetaTokenizer(nullptr, model, both_schemas()), ValidationError);
}

TEST(MetaTokenizer, Exports) {
    const auto& tok = trace_tokenizer();
    auto sv = nlohmann::json::parse(tok.sgpe_vocab_json());
    EXPECT_EQ(sv["[UNK]"], 0);
    EXPECT_EQ(sv[" "], 1);
    EXPECT_EQ(sv.size(), tok.sgpe().size());
    auto mv = nlohmann::json::parse(tok.meta_vocab_json());
    EXPECT_EQ(mv[std::to_string(tok.offset())], "[UNK]");
    EXPECT_EQ(mv["65"], "A");
    const std::string merges = tok.merges_text();
    std::size_t lines = static_cast<std::size_t>(std::count(merges.begin(), merges.end(), '\n'));
    EXPECT_EQ(lines, tok.sgpe().merges().size());
    EXPECT_NE(merges.find("\\s"), std::string::npos);
}

TEST(MetaTokenizer, ConcurrentEncodeIsDeterministic) {
    const auto& tok = trace_tokenizer();
    wwho::testing::Rng rng(99);
    auto lines = wwho::testing::mixed_corpus(rng, defs(), 20000);
    std::vector<std::vector<TokenId>> serial;
    for (const auto& l : lines) serial.push_back(tok.encode(l));
    std::vector<std::vector<std::vector<TokenId>>> par(4, std::vector<std::vector<TokenId>>(lines.size()));
    std::vector<std::thread> pool;
    for (int t = 0; t < 4; ++t)
        pool.emplace_back([&, t] {
            for (std::size_t i = 0; i < lines.size(); ++i) par[t][i] = tok.encode(lines[i]);
        });
    for (auto& th : pool) th.join();
    for (const auto& p : par) EXPECT_EQ(p, serial);
}
