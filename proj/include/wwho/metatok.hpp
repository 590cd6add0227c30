#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wwho/foundation.hpp"
#include "wwho/router.hpp"
#include "wwho/schema.hpp"
#include "wwho/sgpe.hpp"

namespace wwho {

/// Which half of the meta-vocabulary an id belongs to.
enum class IdSpace { kBpe, kSgpe };

const char* to_string(IdSpace s) noexcept;

struct TokenInfo {
    std::string text;  ///< token bytes; BPE tokens may be partial UTF-8
    TokenId id = 0;    ///< meta id
    IdSpace space = IdSpace::kBpe;
    /// Schema index for SGPE tokens, kOtherScript for BPE tokens.
    int script = kOtherScript;
};

inline constexpr int kTokenizerFormatVersion = 1;

/// End-to-end tokenizer over the unified meta-vocabulary:
/// [0, V_BPE) foundation ids, [V_BPE, V_BPE + V_SGPE) SGPE ids shifted by V_BPE.
class MetaTokenizer {
public:
    MetaTokenizer(std::shared_ptr<const FoundationTokenizer> foundation, SgpeModel sgpe,
                  std::vector<LanguageSchema> schemas);

    std::vector<TokenId> encode(std::string_view text) const;
    /// Throws RangeError on ids outside the meta-vocabulary.
    std::string decode(std::span<const TokenId> ids) const;
    std::vector<TokenInfo> token_strings(std::string_view text) const;

    std::size_t offset() const noexcept { return foundation_->vocab_size(); }
    std::size_t total_vocab_size() const noexcept { return offset() + sgpe_.size(); }

    IdSpace space_of(TokenId meta_id) const;
    TokenId to_meta(IdSpace space, TokenId local) const;
    TokenId to_local(TokenId meta_id) const;

    const FoundationTokenizer& foundation() const noexcept { return *foundation_; }
    std::shared_ptr<const FoundationTokenizer> foundation_ptr() const noexcept { return foundation_; }
    const SgpeModel& sgpe() const noexcept { return sgpe_; }
    std::span<const LanguageSchema> schemas() const noexcept { return schemas_; }

    /// Serializes the full state as tokenizer.json.
    /// Foundation file paths are written relative to `relative_to` when it is non-empty.
    std::string to_json(const std::filesystem::path& relative_to = {}) const;
    void save(const std::filesystem::path& path) const;
    /// Relative foundation paths resolve against `base_dir`.
    static MetaTokenizer from_json(std::string_view json_text, const std::filesystem::path& base_dir = {});
    static MetaTokenizer load(const std::filesystem::path& path);

    /// token string -> SGPE local id
    std::string sgpe_vocab_json() const;
    /// meta id -> token string (BPE entries included when they are valid UTF-8)
    std::string meta_vocab_json() const;
    /// One "left right" pair per line with spaces escaped as \s and backslashes as \\.
    std::string merges_text() const;

private:
    std::shared_ptr<const FoundationTokenizer> foundation_;
    SgpeModel sgpe_;
    std::vector<LanguageSchema> schemas_;
};

} // namespace wwho
