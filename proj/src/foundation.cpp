#include "wwho/foundation.hpp"

#include <algorithm>
#include <limits>
#include <unordered_map>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <unicode/regex.h>
#include <unicode/unistr.h>

#include "json_util.hpp"
#include "wwho/digest.hpp"
#include "wwho/error.hpp"

namespace wwho {

const std::string_view kO200kPattern =
    R"([^\r\n\p{L}\p{N}]?[\p{Lu}\p{Lt}\p{Lm}\p{Lo}\p{M}]*[\p{Ll}\p{Lm}\p{Lo}\p{M}]+(?i:'s|'t|'re|'ve|'m|'ll|'d)?)"
    R"(|[^\r\n\p{L}\p{N}]?[\p{Lu}\p{Lt}\p{Lm}\p{Lo}\p{M}]+[\p{Ll}\p{Lm}\p{Lo}\p{M}]*(?i:'s|'t|'re|'ve|'m|'ll|'d)?)"
    R"(|\p{N}{1,3})"
    R"(| ?[^\s\p{L}\p{N}]+[\r\n/]*)"
    R"(|\s*[\r\n]+)"
    R"(|\s+(?!\S))"
    R"(|\s+)";

std::string FoundationTokenizer::decode(std::span<const TokenId> ids) const {
    std::string out;
    for (TokenId id : ids) out += token_bytes(id);
    return out;
}

std::string translate_pretokenizer_pattern(std::string_view pattern) {
    // ICU's \s omits U+000B and U+0085; the reference engines use White_Space.
    std::string out;
    out.reserve(pattern.size() + 32);
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        char c = pattern[i];
        if (c == '\\' && i + 1 < pattern.size()) {
            char e = pattern[++i];
            if (e == 's') out += "\\p{White_Space}";
            else if (e == 'S') out += "\\P{White_Space}";
            else {
                out.push_back('\\');
                out.push_back(e);
            }
            continue;
        }
        out.push_back(c);
    }
    return out;
}

namespace {

class ByteFallback final : public FoundationTokenizer {
public:
    ByteFallback() { desc_ = {"byte_fallback", "byte_fallback", 256, "", "", ""}; }

    std::vector<TokenId> encode(std::string_view text) const override {
        std::vector<TokenId> ids;
        ids.reserve(text.size());
        for (unsigned char c : text) ids.push_back(c);
        return ids;
    }

    std::string token_bytes(TokenId id) const override {
        if (id >= 256) throw RangeError("byte_fallback id out of range: " + std::to_string(id));
        return std::string(1, static_cast<char>(id));
    }

    std::size_t vocab_size() const noexcept override { return 256; }
    const FoundationDescriptor& descriptor() const noexcept override { return desc_; }

private:
    FoundationDescriptor desc_;
};

std::string base64_decode(std::string_view in, std::size_t line_no) {
    if (in.empty() || in.size() % 4 != 0)
        throw ParseError("rank file line " + std::to_string(line_no) + ": malformed base64 token");
    std::string out(in.size() / 4 * 3, '\0');
    int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                            reinterpret_cast<const unsigned char*>(in.data()), static_cast<int>(in.size()));
    if (n < 0) throw ParseError("rank file line " + std::to_string(line_no) + ": malformed base64 token");
    std::size_t pad = 0;
    if (in.back() == '=') ++pad;
    if (in.size() >= 2 && in[in.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

class RankFileTokenizer final : public FoundationTokenizer {
public:
    RankFileTokenizer(std::string_view rank_text, const std::string& config_text, FoundationDescriptor desc)
        : desc_(std::move(desc)) {
        std::string pattern(kO200kPattern);
        std::size_t declared_vocab = 0;
        if (!config_text.empty()) {
            nlohmann::json cfg;
            try {
                cfg = nlohmann::json::parse(config_text);
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(std::string("rank config: ") + e.what());
            }
            if (cfg.contains("pattern")) pattern = cfg.at("pattern").get<std::string>();
            if (cfg.contains("name")) desc_.name = cfg.at("name").get<std::string>();
            if (cfg.contains("vocab_size")) declared_vocab = cfg.at("vocab_size").get<std::size_t>();
            if (cfg.contains("special_tokens")) {
                for (const auto& [text, id] : cfg.at("special_tokens").items()) special_[id.get<TokenId>()] = text;
            }
        }

        std::size_t line_no = 0;
        std::size_t pos = 0;
        TokenId max_id = 0;
        while (pos < rank_text.size()) {
            auto eol = rank_text.find('\n', pos);
            if (eol == std::string_view::npos) eol = rank_text.size();
            std::string_view line = rank_text.substr(pos, eol - pos);
            pos = eol + 1;
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            if (line.empty()) continue;
            auto sp = line.find(' ');
            if (sp == std::string_view::npos || line.find(' ', sp + 1) != std::string_view::npos)
                throw ParseError("rank file line " + std::to_string(line_no) + ": expected '<base64> <rank>'");
            std::string bytes = base64_decode(line.substr(0, sp), line_no);
            std::string_view num = line.substr(sp + 1);
            if (num.empty() || num.size() > 10 || !std::all_of(num.begin(), num.end(), [](char c) { return c >= '0' && c <= '9'; }))
                throw ParseError("rank file line " + std::to_string(line_no) + ": bad rank");
            unsigned long long rank = std::stoull(std::string(num));
            if (rank >= std::numeric_limits<TokenId>::max())
                throw ParseError("rank file line " + std::to_string(line_no) + ": rank too large");
            auto id = static_cast<TokenId>(rank);
            if (!decoder_.emplace(id, bytes).second)
                throw ParseError("rank file line " + std::to_string(line_no) + ": duplicate rank " + std::to_string(id));
            if (!encoder_.emplace(bytes, id).second)
                throw ParseError("rank file line " + std::to_string(line_no) + ": duplicate token");
            max_id = std::max(max_id, id);
        }
        if (encoder_.empty()) throw ParseError("rank file is empty");
        for (const auto& [id, _] : special_) max_id = std::max(max_id, id);
        vocab_size_ = std::max<std::size_t>(declared_vocab, static_cast<std::size_t>(max_id) + 1);
        desc_.vocab_size = vocab_size_;

        UErrorCode status = U_ZERO_ERROR;
        UParseError perr;
        std::string icu_pattern = translate_pretokenizer_pattern(pattern);
        regex_.reset(icu::RegexPattern::compile(icu::UnicodeString::fromUTF8(icu_pattern), 0, perr, status));
        if (U_FAILURE(status))
            throw ParseError("pre-tokenization pattern does not compile (offset " + std::to_string(perr.offset) + ")");
    }

    std::vector<TokenId> encode(std::string_view text) const override {
        std::vector<TokenId> ids;
        if (text.empty()) return ids;
        icu::UnicodeString u = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
        // UTF-16 index -> UTF-8 byte offset.
        std::vector<std::size_t> byte_at(static_cast<std::size_t>(u.length()) + 1, text.size());
        {
            std::size_t b = 0;
            for (int32_t i = 0; i < u.length();) {
                UChar32 cp = u.char32At(i);
                byte_at[static_cast<std::size_t>(i)] = b;
                int32_t units = U16_LENGTH(cp);
                b += cp < 0x80 ? 1 : cp < 0x800 ? 2 : cp < 0x10000 ? 3 : 4;
                i += units;
            }
        }
        UErrorCode status = U_ZERO_ERROR;
        std::unique_ptr<icu::RegexMatcher> m(regex_->matcher(u, status));
        if (U_FAILURE(status)) throw Error("cannot create pre-tokenizer matcher");
        while (m->find(status) && U_SUCCESS(status)) {
            auto s = static_cast<std::size_t>(m->start(status));
            auto e = static_cast<std::size_t>(m->end(status));
            if (e == s) continue;
            encode_piece(text.substr(byte_at[s], byte_at[e] - byte_at[s]), ids);
        }
        return ids;
    }

    std::string token_bytes(TokenId id) const override {
        if (auto it = decoder_.find(id); it != decoder_.end()) return it->second;
        if (auto it = special_.find(id); it != special_.end()) return it->second;
        throw RangeError("foundation id out of range: " + std::to_string(id));
    }

    std::size_t vocab_size() const noexcept override { return vocab_size_; }
    const FoundationDescriptor& descriptor() const noexcept override { return desc_; }

private:
    static constexpr TokenId kNoRank = std::numeric_limits<TokenId>::max();

    TokenId rank_of(std::string_view bytes) const {
        auto it = encoder_.find(std::string(bytes));
        return it == encoder_.end() ? kNoRank : it->second;
    }

    // Repeatedly merges the leftmost adjacent pair whose concatenation has the
    // lowest rank, then maps the surviving parts to ranks.
    void encode_piece(std::string_view piece, std::vector<TokenId>& out) const {
        if (auto whole = rank_of(piece); whole != kNoRank) {
            out.push_back(whole);
            return;
        }
        struct Part {
            std::size_t start;
            TokenId rank;
        };
        std::vector<Part> parts;
        parts.reserve(piece.size() + 1);
        for (std::size_t i = 0; i < piece.size(); ++i) {
            parts.push_back({i, i + 1 < piece.size() ? rank_of(piece.substr(i, 2)) : kNoRank});
        }
        parts.push_back({piece.size(), kNoRank});

        auto pair_rank = [&](std::size_t i) {
            if (i + 2 < parts.size()) return rank_of(piece.substr(parts[i].start, parts[i + 2].start - parts[i].start));
            return kNoRank;
        };
        while (true) {
            TokenId best = kNoRank;
            std::size_t at = 0;
            for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
                if (parts[i].rank < best) {
                    best = parts[i].rank;
                    at = i;
                }
            }
            if (best == kNoRank) break;
            parts.erase(parts.begin() + static_cast<std::ptrdiff_t>(at) + 1);
            parts[at].rank = pair_rank(at);
            if (at > 0) parts[at - 1].rank = pair_rank(at - 1);
        }
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
            auto r = rank_of(piece.substr(parts[i].start, parts[i + 1].start - parts[i].start));
            if (r == kNoRank) throw Error("rank file is not byte-complete: missing a single-byte token");
            out.push_back(r);
        }
    }

    FoundationDescriptor desc_;
    std::unordered_map<std::string, TokenId> encoder_;
    std::unordered_map<TokenId, std::string> decoder_;
    std::unordered_map<TokenId, std::string> special_;
    std::size_t vocab_size_ = 0;
    std::unique_ptr<icu::RegexPattern> regex_;
};

} // namespace

std::shared_ptr<const FoundationTokenizer> byte_fallback() {
    static const auto instance = std::make_shared<const ByteFallback>();
    return instance;
}

std::shared_ptr<const FoundationTokenizer> load_rank_file(const std::filesystem::path& rank_file,
                                                          const std::filesystem::path& config) {
    std::string ranks = detail::read_file(rank_file.string());
    std::filesystem::path cfg_path = config;
    if (cfg_path.empty()) {
        std::filesystem::path side = rank_file;
        side += ".config.json";
        if (std::filesystem::is_regular_file(side)) cfg_path = side;
    }
    std::string cfg = cfg_path.empty() ? std::string() : detail::read_file(cfg_path.string());
    FoundationDescriptor d;
    d.kind = "rank_file";
    d.name = rank_file.stem().string();
    d.sha256 = sha256_hex(ranks + '\0' + cfg);
    d.rank_file = rank_file.string();
    d.config_file = cfg_path.string();
    return std::make_shared<const RankFileTokenizer>(ranks, cfg, std::move(d));
}

std::shared_ptr<const FoundationTokenizer> open_foundation(const FoundationDescriptor& d,
                                                           const std::filesystem::path& base_dir) {
    if (d.kind == "byte_fallback") {
        if (d.vocab_size != 256) throw ValidationError("byte_fallback descriptor must have vocab_size 256");
        return byte_fallback();
    }
    if (d.kind != "rank_file") throw ParseError("unknown foundation kind: " + d.kind);
    auto resolve = [&](const std::string& p) -> std::filesystem::path {
        if (p.empty()) return {};
        std::filesystem::path path(p);
        if (path.is_relative()) path = base_dir / path;
        return path.lexically_normal();
    };
    auto tok = load_rank_file(resolve(d.rank_file), resolve(d.config_file));
    if (tok->descriptor().sha256 != d.sha256)
        throw ValidationError("foundation hash mismatch for " + d.rank_file + ": expected " + d.sha256 + ", found " +
                              tok->descriptor().sha256);
    if (tok->vocab_size() != d.vocab_size) throw ValidationError("foundation vocab size mismatch for " + d.rank_file);
    return tok;
}

} // namespace wwho
