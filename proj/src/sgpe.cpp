#include "wwho/sgpe.hpp"

#include <algorithm>
#include <queue>
#include <thread>

#include "wwho/error.hpp"
#include "wwho/utf8.hpp"

namespace wwho {

namespace {

constexpr std::uint64_t pair_key(TokenId a, TokenId b) noexcept {
    return (static_cast<std::uint64_t>(a) << 32) | b;
}
constexpr TokenId key_left(std::uint64_t k) noexcept { return static_cast<TokenId>(k >> 32); }
constexpr TokenId key_right(std::uint64_t k) noexcept { return static_cast<TokenId>(k & 0xFFFFFFFFu); }

// Replaces every non-overlapping (a, b), scanning left to right.
bool merge_in_place(std::vector<TokenId>& sym, TokenId a, TokenId b, TokenId m) {
    bool changed = false;
    std::size_t w = 0;
    for (std::size_t r = 0; r < sym.size();) {
        if (r + 1 < sym.size() && sym[r] == a && sym[r + 1] == b) {
            sym[w++] = m;
            r += 2;
            changed = true;
        } else {
            sym[w++] = sym[r++];
        }
    }
    sym.resize(w);
    return changed;
}

} // namespace

const char* to_string(PruneScope s) noexcept {
    return s == PruneScope::kSyllables ? "syllables" : "all";
}

PruneScope parse_prune_scope(std::string_view s) {
    if (s == "syllables") return PruneScope::kSyllables;
    if (s == "all") return PruneScope::kAll;
    throw ParseError("prune scope must be 'syllables' or 'all', got '" + std::string(s) + "'");
}

// ---------------------------------------------------------------- model

SgpeModel SgpeModel::from_parts(std::vector<std::string> vocab, std::vector<std::pair<std::string, std::string>> merges,
                                std::int64_t prune_threshold, PruneScope scope, std::vector<std::string> schema_names,
                                bool vocab_exhausted) {
    if (vocab.size() < 2 || vocab[kUnkId] != kUnkToken || vocab[kSpaceId] != kSpaceToken)
        throw ValidationError("SGPE vocab must start with \"[UNK]\" and \" \"");
    if (prune_threshold < 1) throw ValidationError("prune threshold must be at least 1");
    SgpeModel m;
    m.vocab_ = std::move(vocab);
    for (std::size_t i = 0; i < m.vocab_.size(); ++i) {
        if (m.vocab_[i].empty()) throw ValidationError("SGPE vocab entry " + std::to_string(i) + " is empty");
        if (!m.index_.emplace(m.vocab_[i], static_cast<TokenId>(i)).second)
            throw ValidationError("SGPE vocab repeats token at id " + std::to_string(i));
    }
    for (auto& [l, r] : merges) {
        auto li = m.find(l);
        auto ri = m.find(r);
        auto mi = m.find(l + r);
        if (!li || !ri || !mi) throw ValidationError("merge " + std::to_string(m.merges_.size()) + " references unknown tokens");
        auto rank = static_cast<std::uint32_t>(m.merges_.size());
        if (!m.merge_map_.emplace(pair_key(*li, *ri), std::make_pair(rank, *mi)).second)
            throw ValidationError("merge " + std::to_string(rank) + " repeats an earlier pair");
        m.merges_.push_back({std::move(l), std::move(r), rank});
    }
    m.prune_threshold_ = prune_threshold;
    m.prune_scope_ = scope;
    m.schema_names_ = std::move(schema_names);
    m.vocab_exhausted_ = vocab_exhausted;
    return m;
}

const std::string& SgpeModel::token(TokenId id) const {
    if (id >= vocab_.size()) throw RangeError("SGPE id out of range: " + std::to_string(id));
    return vocab_[id];
}

std::optional<TokenId> SgpeModel::find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

void SgpeModel::apply_merges(std::vector<TokenId>& word) const {
    while (word.size() >= 2) {
        std::uint32_t best = UINT32_MAX;
        std::uint64_t best_key = 0;
        TokenId merged = 0;
        for (std::size_t i = 0; i + 1 < word.size(); ++i) {
            auto it = merge_map_.find(pair_key(word[i], word[i + 1]));
            if (it != merge_map_.end() && it->second.first < best) {
                best = it->second.first;
                best_key = it->first;
                merged = it->second.second;
            }
        }
        if (best == UINT32_MAX) return;
        merge_in_place(word, key_left(best_key), key_right(best_key), merged);
    }
}

std::vector<TokenId> SgpeModel::encode(std::span<const Syllable> syllables) const {
    std::vector<TokenId> out;
    std::vector<TokenId> word;
    auto flush = [&] {
        apply_merges(word);
        out.insert(out.end(), word.begin(), word.end());
        word.clear();
    };
    for (const auto& s : syllables) {
        const std::string text = encode_utf8(s.text);
        switch (s.kind) {
        case SyllableKind::kSyllable: {
            if (s.space_prefixed) flush();
            if (auto id = find(text)) {
                word.push_back(*id);
            } else {
                flush();
                out.push_back(kUnkId);
            }
            break;
        }
        case SyllableKind::kWhitespace:
            flush();
            out.push_back(text == kSpaceToken ? kSpaceId : find(text).value_or(kUnkId));
            break;
        case SyllableKind::kOrphan:
        case SyllableKind::kPassthrough:
            flush();
            out.push_back(find(text).value_or(kUnkId));
            break;
        case SyllableKind::kForeign:
            throw Error("SGPE cannot encode an OTHER segment");
        }
    }
    flush();
    return out;
}

std::string SgpeModel::decode(std::span<const TokenId> ids) const {
    std::string out;
    for (TokenId id : ids) out += token(id);
    return out;
}

std::vector<TokenId> encode_segment(std::span<const Syllable> syllables, const SgpeModel& model) {
    return model.encode(syllables);
}

std::string decode_segment(std::span<const TokenId> ids, const SgpeModel& model) {
    return model.decode(ids);
}

// ---------------------------------------------------------------- chunking

std::vector<TrainChunk> training_chunks(std::u32string_view line, std::span<const LanguageSchema> schemas) {
    std::vector<TrainChunk> out;
    TrainChunk word;
    auto flush = [&] {
        if (!word.units.empty()) out.push_back(std::move(word));
        word = TrainChunk{};
    };
    for (const auto& seg : route(line, schemas)) {
        if (seg.is_other()) continue;
        for (auto& s : syllabify(seg.text, schemas[static_cast<std::size_t>(seg.script)])) {
            if (s.kind == SyllableKind::kSyllable) {
                if (s.space_prefixed) flush();
                word.units.push_back(encode_utf8(s.text));
            } else {
                flush();
                out.push_back({{encode_utf8(s.text)}, false});
            }
        }
        flush();
    }
    return out;
}

// ---------------------------------------------------------------- trainer

SgpeTrainer::SgpeTrainer(std::vector<LanguageSchema> schemas, TrainOptions opts)
    : schemas_(std::move(schemas)), opts_(opts) {
    if (schemas_.empty()) throw TrainError("SGPE training needs at least one schema");
    if (opts_.prune_threshold < 1) throw TrainError("prune threshold must be at least 1");
    if (opts_.threads == 0) opts_.threads = 1;
}

std::uint32_t SgpeTrainer::intern(std::string&& text, bool syllable) {
    auto [it, fresh] = unit_index_.try_emplace(text, static_cast<std::uint32_t>(units_.size()));
    if (fresh) units_.push_back({std::move(text), 0, syllable});
    units_[it->second].count += 1;
    return it->second;
}

void SgpeTrainer::ingest(std::vector<TrainChunk>&& chunks) {
    ++lines_;
    std::string key;
    for (auto& c : chunks) {
        if (!c.word) {
            if (c.units[0] != SgpeModel::kSpaceToken) intern(std::move(c.units[0]), false);
            continue;
        }
        std::vector<std::uint32_t> ids;
        ids.reserve(c.units.size());
        for (auto& u : c.units) ids.push_back(intern(std::move(u), true));
        key.assign(reinterpret_cast<const char*>(ids.data()), ids.size() * sizeof(std::uint32_t));
        auto [it, fresh] = word_index_.try_emplace(key, words_.size());
        if (fresh) words_.push_back({std::move(ids), 0});
        words_[it->second].count += 1;
    }
}

void SgpeTrainer::add_line(std::string_view utf8_line) {
    ingest(training_chunks(decode_utf8(utf8_line), schemas_));
}

void SgpeTrainer::add_lines(std::span<const std::string> lines) {
    const std::size_t workers = std::min<std::size_t>(opts_.threads, lines.size());
    if (workers <= 1) {
        for (const auto& l : lines) add_line(l);
        return;
    }
    std::vector<std::vector<TrainChunk>> results(lines.size());
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    const std::size_t per = (lines.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w * per; i < std::min(lines.size(), (w + 1) * per); ++i)
                    results[i] = training_chunks(decode_utf8(lines[i]), schemas_);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    for (auto& r : results) ingest(std::move(r));
}

void SgpeTrainer::add_corpus(std::istream& in, std::size_t batch) {
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        if (lines.size() == batch) {
            add_lines(lines);
            lines.clear();
        }
    }
    add_lines(lines);
}

bool SgpeTrainer::survives(const Unit& u) const {
    if (!u.syllable && opts_.prune_scope == PruneScope::kSyllables) return true;
    return u.count >= opts_.prune_threshold;
}

std::size_t SgpeTrainer::surviving_units() const {
    return static_cast<std::size_t>(std::count_if(units_.begin(), units_.end(), [this](const Unit& u) { return survives(u); }));
}

SgpeModel SgpeTrainer::train() const {
    if (std::none_of(units_.begin(), units_.end(), [](const Unit& u) { return u.syllable; }))
        throw TrainError("corpus yields zero Abugida syllables");

    std::vector<std::string> vocab{std::string(SgpeModel::kUnkToken), std::string(SgpeModel::kSpaceToken)};
    std::unordered_map<std::string, TokenId> vocab_index{{vocab[0], 0}, {vocab[1], 1}};
    std::vector<TokenId> unit_to_id(units_.size(), SgpeModel::kUnkId);
    for (std::size_t i = 0; i < units_.size(); ++i) {
        if (!survives(units_[i])) continue;
        auto [it, fresh] = vocab_index.try_emplace(units_[i].text, static_cast<TokenId>(vocab.size()));
        if (fresh) vocab.push_back(units_[i].text);
        unit_to_id[i] = it->second;
    }
    if (opts_.vocab_size < vocab.size()) {
        throw TrainError("vocab_size " + std::to_string(opts_.vocab_size) + " cannot hold the " +
                         std::to_string(vocab.size()) + " surviving base units and specials");
    }

    // Word types split at pruned units; each piece keeps its type count.
    struct Word {
        std::vector<TokenId> sym;
        std::int64_t count;
    };
    std::vector<Word> words;
    for (const auto& wt : words_) {
        std::vector<TokenId> piece;
        auto emit = [&] {
            if (piece.size() >= 2) words.push_back({piece, wt.count});
            piece.clear();
        };
        for (auto u : wt.units) {
            TokenId id = unit_to_id[u];
            if (id == SgpeModel::kUnkId) emit();
            else piece.push_back(id);
        }
        emit();
    }

    std::unordered_map<std::uint64_t, std::int64_t> pair_count;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> pair_words;
    for (std::uint32_t w = 0; w < words.size(); ++w) {
        const auto& s = words[w].sym;
        for (std::size_t i = 0; i + 1 < s.size(); ++i) {
            auto k = pair_key(s[i], s[i + 1]);
            pair_count[k] += words[w].count;
            auto& where = pair_words[k];
            if (where.empty() || where.back() != w) where.push_back(w);
        }
    }

    // Max count first; on ties the lexicographically smallest (left, right) id pair.
    struct Entry {
        std::int64_t count;
        std::uint64_t key;
        bool operator<(const Entry& o) const { return count != o.count ? count < o.count : key > o.key; }
    };
    std::priority_queue<Entry> heap;
    for (const auto& [k, c] : pair_count) heap.push({c, k});

    std::vector<std::pair<std::string, std::string>> merges;
    std::vector<std::uint32_t> visited(words.size(), 0);
    std::uint32_t stamp = 0;
    std::vector<std::uint64_t> touched;
    bool exhausted = false;

    while (vocab.size() < opts_.vocab_size) {
        while (!heap.empty()) {
            auto it = pair_count.find(heap.top().key);
            if (it != pair_count.end() && it->second == heap.top().count) break;
            heap.pop();
        }
        if (heap.empty() || heap.top().count < 2) {
            exhausted = true;
            break;
        }
        const std::uint64_t key = heap.top().key;
        heap.pop();
        const TokenId a = key_left(key);
        const TokenId b = key_right(key);
        std::string merged = vocab[a] + vocab[b];
        auto [vit, fresh] = vocab_index.try_emplace(merged, static_cast<TokenId>(vocab.size()));
        if (fresh) vocab.push_back(merged);
        const TokenId m = vit->second;
        merges.emplace_back(vocab[a], vocab[b]);

        ++stamp;
        touched.clear();
        std::vector<std::uint32_t> where = std::move(pair_words[key]);
        pair_words.erase(key);
        for (std::uint32_t w : where) {
            if (visited[w] == stamp) continue;
            visited[w] = stamp;
            Word& word = words[w];
            std::vector<TokenId> before = word.sym;
            if (!merge_in_place(word.sym, a, b, m)) continue;
            for (std::size_t i = 0; i + 1 < before.size(); ++i) {
                auto k = pair_key(before[i], before[i + 1]);
                pair_count[k] -= word.count;
                touched.push_back(k);
            }
            for (std::size_t i = 0; i + 1 < word.sym.size(); ++i) {
                auto k = pair_key(word.sym[i], word.sym[i + 1]);
                pair_count[k] += word.count;
                touched.push_back(k);
                auto& list = pair_words[k];
                if (list.empty() || list.back() != w) list.push_back(w);
            }
        }
        std::sort(touched.begin(), touched.end());
        touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
        for (auto k : touched) {
            auto it = pair_count.find(k);
            if (it->second <= 0) {
                pair_count.erase(it);
            } else {
                heap.push({it->second, k});
            }
        }
    }

    std::vector<std::string> names;
    for (const auto& s : schemas_) names.push_back(s.name());
    return SgpeModel::from_parts(std::move(vocab), std::move(merges), opts_.prune_threshold, opts_.prune_scope,
                                 std::move(names), exhausted);
}

SgpeModel train_sgpe(std::istream& corpus, std::span<const LanguageSchema> schemas, const TrainOptions& opts) {
    SgpeTrainer t(std::vector<LanguageSchema>(schemas.begin(), schemas.end()), opts);
    t.add_corpus(corpus);
    return t.train();
}

} // namespace wwho
