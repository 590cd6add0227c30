#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wwho {

using TokenId = std::uint32_t;

/// Identifies a foundation backend inside a serialized tokenizer.
struct FoundationDescriptor {
    std::string kind;         ///< "byte_fallback" or "rank_file"
    std::string name;
    std::size_t vocab_size = 0;
    std::string sha256;       ///< content hash of rank file + config; empty for byte_fallback
    std::string rank_file;    ///< path as given when the tokenizer was built
    std::string config_file;  ///< sidecar path, empty when the default pattern is used
};

/// Byte-complete tokenizer for non-Abugida text. Implementations are immutable.
class FoundationTokenizer {
public:
    virtual ~FoundationTokenizer() = default;

    virtual std::vector<TokenId> encode(std::string_view text) const = 0;
    /// Concatenated token bytes. Throws RangeError on unknown ids.
    virtual std::string decode(std::span<const TokenId> ids) const;
    virtual std::string token_bytes(TokenId id) const = 0;
    virtual std::size_t vocab_size() const noexcept = 0;
    virtual const FoundationDescriptor& descriptor() const noexcept = 0;
};

/// The o200k pre-tokenization pattern, used when no sidecar config is present.
extern const std::string_view kO200kPattern;

/// V = 256, id = byte value.
std::shared_ptr<const FoundationTokenizer> byte_fallback();

/// Loads a tiktoken-style rank file (`base64(token) rank` per line).
///
/// The sidecar config is JSON with optional keys `name`, `pattern`,
/// `special_tokens` (text -> id) and `vocab_size`. When `config` is empty,
/// `<rank_file>.config.json` is used if it exists.
std::shared_ptr<const FoundationTokenizer> load_rank_file(const std::filesystem::path& rank_file,
                                                          const std::filesystem::path& config = {});

/// Rebuilds a backend from its descriptor, verifying the content hash.
/// Relative paths resolve against `base_dir`.
std::shared_ptr<const FoundationTokenizer> open_foundation(const FoundationDescriptor& d,
                                                           const std::filesystem::path& base_dir);

/// Rewrites a regex written for Rust/PCRE-style `\s` semantics into ICU syntax.
std::string translate_pretokenizer_pattern(std::string_view pattern);

} // namespace wwho
