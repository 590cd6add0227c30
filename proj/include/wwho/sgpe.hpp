#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wwho/foundation.hpp"
#include "wwho/linguistrie.hpp"
#include "wwho/schema.hpp"

namespace wwho {

struct MergeRule {
    std::string left;
    std::string right;
    std::uint32_t rank = 0;

    std::string merged() const { return left + right; }
    friend bool operator==(const MergeRule&, const MergeRule&) = default;
};

/// Which base units the prune threshold applies to.
enum class PruneScope { kSyllables, kAll };

const char* to_string(PruneScope s) noexcept;
PruneScope parse_prune_scope(std::string_view s);

/// Trained syllable vocabulary and ordered merge rules. Immutable.
///
/// Local id 0 is "[UNK]" and local id 1 is the standalone space; both count
/// toward size(). Base units follow in first-occurrence order, then merged
/// tokens in the order they were learned.
class SgpeModel {
public:
    static constexpr TokenId kUnkId = 0;
    static constexpr TokenId kSpaceId = 1;
    static constexpr std::string_view kUnkToken = "[UNK]";
    static constexpr std::string_view kSpaceToken = " ";

    /// Rebuilds a model from serialized parts. Throws ValidationError when the
    /// specials are misplaced, tokens repeat, or a merge references unknown tokens.
    static SgpeModel from_parts(std::vector<std::string> vocab, std::vector<std::pair<std::string, std::string>> merges,
                                std::int64_t prune_threshold, PruneScope scope, std::vector<std::string> schema_names,
                                bool vocab_exhausted = false);

    std::size_t size() const noexcept { return vocab_.size(); }
    const std::string& token(TokenId id) const;
    std::optional<TokenId> find(std::string_view token) const;
    const std::vector<std::string>& vocab() const noexcept { return vocab_; }
    const std::vector<MergeRule>& merges() const noexcept { return merges_; }
    std::int64_t prune_threshold() const noexcept { return prune_threshold_; }
    PruneScope prune_scope() const noexcept { return prune_scope_; }
    const std::vector<std::string>& schema_names() const noexcept { return schema_names_; }
    /// True when training ran out of mergeable pairs before reaching the requested size.
    bool vocab_exhausted() const noexcept { return vocab_exhausted_; }

    /// Encodes one Abugida segment's syllables. Merges apply inside words only:
    /// a word is a run of syllables, broken by whitespace, orphans, passthroughs,
    /// unknown units, and any space-prefixed syllable (which starts a new word).
    std::vector<TokenId> encode(std::span<const Syllable> syllables) const;

    /// Concatenates token strings; [UNK] renders literally. Throws RangeError.
    std::string decode(std::span<const TokenId> ids) const;

private:
    void apply_merges(std::vector<TokenId>& word) const;

    struct PairHash {
        std::size_t operator()(std::uint64_t k) const noexcept { return std::hash<std::uint64_t>{}(k); }
    };

    std::vector<std::string> vocab_;
    std::unordered_map<std::string, TokenId> index_;
    std::vector<MergeRule> merges_;
    /// (left << 32 | right) -> (rank, merged id)
    std::unordered_map<std::uint64_t, std::pair<std::uint32_t, TokenId>, PairHash> merge_map_;
    std::int64_t prune_threshold_ = 1;
    PruneScope prune_scope_ = PruneScope::kAll;
    std::vector<std::string> schema_names_;
    bool vocab_exhausted_ = false;
};

std::vector<TokenId> encode_segment(std::span<const Syllable> syllables, const SgpeModel& model);
std::string decode_segment(std::span<const TokenId> ids, const SgpeModel& model);

struct TrainOptions {
    std::size_t vocab_size = 128000;
    std::int64_t prune_threshold = 100;
    PruneScope prune_scope = PruneScope::kAll;
    unsigned threads = 1;
};

/// One training occurrence unit: a word (run of syllables) or a lone non-syllable unit.
struct TrainChunk {
    std::vector<std::string> units;
    bool word = true;
};

/// Splits a line into word chunks exactly as the trainer and encoder see it.
std::vector<TrainChunk> training_chunks(std::u32string_view line, std::span<const LanguageSchema> schemas);

/// Streaming SGPE trainer. Lines are routed and syllabified as they arrive; only
/// the distinct word types and unit counts are retained.
class SgpeTrainer {
public:
    SgpeTrainer(std::vector<LanguageSchema> schemas, TrainOptions opts);

    /// Throws ParseError on malformed UTF-8.
    void add_line(std::string_view utf8_line);
    /// Processes a batch, fanning syllabification out over opts.threads workers.
    /// Results are merged in input order, so the model does not depend on the thread count.
    void add_lines(std::span<const std::string> lines);
    void add_corpus(std::istream& in, std::size_t batch = 4096);

    std::size_t distinct_units() const noexcept { return units_.size(); }
    /// Base units that pass the prune threshold, excluding the reserved specials.
    std::size_t surviving_units() const;
    std::size_t lines_seen() const noexcept { return lines_; }

    /// Runs the merge loop. Throws TrainError when the corpus has no Abugida
    /// syllables or vocab_size cannot hold the surviving base units.
    SgpeModel train() const;

    const TrainOptions& options() const noexcept { return opts_; }

private:
    struct Unit {
        std::string text;
        std::int64_t count = 0;
        bool syllable = false;
    };
    struct WordType {
        std::vector<std::uint32_t> units;
        std::int64_t count = 0;
    };

    void ingest(std::vector<TrainChunk>&& chunks);
    std::uint32_t intern(std::string&& text, bool syllable);
    bool survives(const Unit& u) const;

    std::vector<LanguageSchema> schemas_;
    TrainOptions opts_;
    std::vector<Unit> units_;
    std::unordered_map<std::string, std::uint32_t> unit_index_;
    std::vector<WordType> words_;
    std::unordered_map<std::string, std::size_t> word_index_;
    std::size_t lines_ = 0;
};

SgpeModel train_sgpe(std::istream& corpus, std::span<const LanguageSchema> schemas, const TrainOptions& opts);

} // namespace wwho
