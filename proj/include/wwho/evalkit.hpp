#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wwho/metatok.hpp"
#include "wwho/schema.hpp"
#include "wwho/sgpe.hpp"

namespace wwho {

/// tokens / words. Throws RangeError when words == 0.
double twr(std::uint64_t tokens, std::uint64_t words);
/// chars / tokens. Throws RangeError when tokens == 0.
double cpt(std::uint64_t chars, std::uint64_t tokens);
/// baseline / sgpe. Throws RangeError when tokens_sgpe == 0.
double capacity_multiplier(std::uint64_t tokens_baseline, std::uint64_t tokens_sgpe);
/// 100 * (1 - sgpe / baseline). Throws RangeError when tokens_baseline == 0.
double reduction_pct(std::uint64_t tokens_baseline, std::uint64_t tokens_sgpe);

struct WordCountOptions {
    /// Treat U+0964 and U+0965 as separators in addition to whitespace.
    bool danda_splits_words = false;
};

/// Number of non-empty runs between Unicode whitespace codepoints.
std::size_t word_count(std::string_view utf8, const WordCountOptions& opts = {});
std::size_t word_count(std::u32string_view text, const WordCountOptions& opts = {});

/// SGPE vocabulary entries that do not decompose into whole syllables.
///
/// A multi-codepoint token offends when, after removing one leading space, the
/// scanner does not split it into grammar-accepted syllables with no further
/// space prefixes. A single joiner or virama offends unless the scanner emits it
/// as an orphan. The two reserved specials are skipped.
std::vector<std::string> glitch_audit(const SgpeModel& model, std::span<const LanguageSchema> schemas);

struct RoundtripResult {
    std::size_t lines = 0;
    std::size_t mismatches = 0;
    std::uint64_t total_chars = 0;
    /// Input codepoints covered by aligned [UNK] spans.
    std::uint64_t unk_chars = 0;
    /// unk_chars / total_chars * 100; 0 for an empty corpus.
    double unk_loss_rate = 0.0;
};

/// Aligns `decoded` against `original`, treating every literal "[UNK]" in
/// `decoded` as standing for a non-empty run of original codepoints. Returns
/// false when no alignment exists; otherwise stores the covered count.
bool align_unk(std::u32string_view original, std::u32string_view decoded, std::uint64_t* unk_chars);

RoundtripResult roundtrip_audit(const MetaTokenizer& tok, std::span<const std::string> lines, unsigned threads = 1);

/// Percentage of lines whose meta encoding differs from the foundation encoding.
/// Throws ValidationError if any line contains a non-ASCII byte.
double ascii_stress_test(const MetaTokenizer& tok, std::span<const std::string> lines, unsigned threads = 1);

struct VocabUsage {
    /// Distinct SGPE local ids emitted over the corpus, specials included.
    std::size_t used = 0;
    /// SGPE vocab size (specials included) minus used.
    std::size_t unused = 0;
};

VocabUsage vocab_utilization(const MetaTokenizer& tok, std::span<const std::string> lines, unsigned threads = 1);

enum class BucketBy { kFile, kTokenScript };

const char* to_string(BucketBy b) noexcept;
BucketBy parse_bucket_by(std::string_view s);

struct EvalInput {
    /// Bucket label used with BucketBy::kFile.
    std::string label;
    std::vector<std::string> lines;
};

struct BucketStats {
    std::string name;
    std::uint64_t total_tokens = 0;
    std::uint64_t total_words = 0;
    std::uint64_t total_chars = 0;
    double twr = 0.0;
    double cpt = 0.0;
    std::map<std::string, double> reduction_vs;
    std::map<std::string, double> capacity_vs;
};

struct EvalReport {
    std::vector<BucketStats> buckets;
    BucketStats overall;
    std::size_t glitch_count = 0;
    std::size_t unused_vocab_count = 0;
    std::size_t roundtrip_mismatches = 0;
    double unk_loss_rate = 0.0;

    std::string to_json() const;
    /// Aligned plain-text table, one row per bucket and baseline.
    std::string to_table() const;
};

/// Precomputed token counts of a third-party tokenizer, keyed by bucket name.
/// The key "overall" supplies the corpus total; otherwise buckets are summed.
struct BaselineCounts {
    std::string name;
    std::map<std::string, std::uint64_t> counts;
};

/// Parses `<bucket> <count>` lines; blank lines and `#` comments are ignored.
BaselineCounts parse_baseline_counts(std::string_view text, std::string name);

struct EvalOptions {
    BucketBy bucket_by = BucketBy::kFile;
    WordCountOptions words;
    unsigned threads = 1;
    std::vector<BaselineCounts> baselines;
};

EvalReport evaluate(const MetaTokenizer& tok, std::span<const EvalInput> inputs, const EvalOptions& opts = {});

} // namespace wwho
