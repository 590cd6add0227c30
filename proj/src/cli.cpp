#include "wwho/cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wwho/error.hpp"
#include "wwho/evalkit.hpp"
#include "wwho/foundation.hpp"
#include "wwho/linguistrie.hpp"
#include "wwho/metatok.hpp"
#include "wwho/router.hpp"
#include "wwho/schema.hpp"
#include "wwho/sgpe.hpp"
#include "wwho/utf8.hpp"

namespace wwho {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct CliConfig {
    std::vector<std::string> schemas;
    std::vector<std::string> corpora;
    std::string input = "-";
    std::string output = "-";
    std::string tokenizer;
    std::size_t vocab_size = 128000;
    std::int64_t prune = 100;
    std::string prune_scope = "all";
    std::string foundation = "byte";
    std::string rank_file;
    std::string rank_config;
    unsigned threads = 1;
    std::uint64_t seed = 0;
    bool nfc = false;
    bool direct = false;
    std::string format;
    std::string bucket_by = "file";
    bool danda_splits_words = false;
    std::vector<std::string> baselines;
    std::string export_vocab;
    std::string export_sgpe_vocab;
    std::string export_merges;
};

class Io {
public:
    Io(std::istream& in, std::ostream& out) : in_(in), out_(out) {}

    /// Calls fn once per line of `path` ("-" reads the provided stdin).
    void each_line(const std::string& path, bool nfc, const std::function<void(const std::string&)>& fn) const {
        std::ifstream file;
        std::istream* src = &in_;
        if (path != "-") {
            file.open(path, std::ios::binary);
            if (!file) throw Error("cannot read " + path);
            src = &file;
        }
        std::string line;
        while (std::getline(*src, line)) fn(nfc ? normalize_nfc(line) : line);
    }

    std::vector<std::string> lines(const std::string& path, bool nfc) const {
        std::vector<std::string> out;
        each_line(path, nfc, [&](const std::string& l) { out.push_back(l); });
        return out;
    }

    /// Writes to `path`, or to stdout for "-".
    void emit(const std::string& path, const std::string& text) const {
        if (path == "-") {
            out_ << text;
            return;
        }
        std::ofstream f(path, std::ios::binary);
        if (!f) throw Error("cannot write " + path);
        f << text;
        if (!f) throw Error("write failed for " + path);
    }

    std::ostream& out() const { return out_; }

private:
    std::istream& in_;
    std::ostream& out_;
};

std::vector<LanguageSchema> load_schemas(std::vector<std::string> names) {
    if (names.empty()) names = {"sinhala", "devanagari"};
    std::vector<LanguageSchema> out;
    for (const auto& n : names) out.push_back(load_schema(resolve_schema_path(n)));
    return out;
}

std::shared_ptr<const FoundationTokenizer> make_foundation(const CliConfig& c) {
    if (c.foundation == "byte") {
        if (!c.rank_file.empty()) throw ValidationError("--rank-file requires --foundation rank");
        return byte_fallback();
    }
    if (c.rank_file.empty()) throw ValidationError("--foundation rank requires --rank-file");
    return load_rank_file(c.rank_file, c.rank_config);
}

std::string join_ids(const std::vector<TokenId>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) s.push_back(' ');
        s += std::to_string(ids[i]);
    }
    return s;
}

std::string dump(const json& j) {
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

void cmd_train(const CliConfig& c, const Io& io) {
    if (c.corpora.empty()) throw ValidationError("train: at least one --corpus is required");
    if (c.tokenizer.empty()) throw ValidationError("train: --out is required");
    if (c.prune < 1) throw ValidationError("train: --prune must be at least 1");
    TrainOptions opts;
    opts.vocab_size = c.vocab_size;
    opts.prune_threshold = c.prune;
    opts.prune_scope = parse_prune_scope(c.prune_scope);
    opts.threads = c.threads;
    auto schemas = load_schemas(c.schemas);
    auto foundation = make_foundation(c);
    for (const auto& p : c.corpora)
        if (p != "-" && !fs::is_regular_file(p)) throw Error("cannot read corpus " + p);

    SgpeTrainer trainer(schemas, opts);
    std::vector<std::string> batch;
    auto flush = [&] {
        trainer.add_lines(batch);
        batch.clear();
    };
    for (const auto& p : c.corpora) {
        io.each_line(p, c.nfc, [&](const std::string& l) {
            batch.push_back(l);
            if (batch.size() >= 4096) flush();
        });
    }
    flush();
    MetaTokenizer tok(foundation, trainer.train(), std::move(schemas));
    tok.save(c.tokenizer);
    io.out() << "wrote " << c.tokenizer << ": V_BPE " << tok.offset() << ", V_SGPE " << tok.sgpe().size()
             << ", merges " << tok.sgpe().merges().size() << (tok.sgpe().vocab_exhausted() ? " (pairs exhausted)" : "")
             << "\n";
}

MetaTokenizer open_tokenizer(const CliConfig& c) {
    if (c.tokenizer.empty()) throw ValidationError("--tokenizer is required");
    return MetaTokenizer::load(c.tokenizer);
}

void cmd_encode(const CliConfig& c, const Io& io) {
    const std::string fmt = c.format.empty() ? "ids" : c.format;
    if (fmt != "ids" && fmt != "tokens") throw ValidationError("encode: --format must be ids or tokens");
    auto tok = open_tokenizer(c);
    std::string out;
    io.each_line(c.input, c.nfc, [&](const std::string& l) {
        if (fmt == "ids") {
            out += join_ids(tok.encode(l)) + "\n";
        } else {
            json arr = json::array();
            for (const auto& t : tok.token_strings(l))
                arr.push_back(json::array({t.text, t.id, to_string(t.space)}));
            out += dump(arr) + "\n";
        }
    });
    io.emit(c.output, out);
}

void cmd_decode(const CliConfig& c, const Io& io) {
    auto tok = open_tokenizer(c);
    std::string out;
    std::size_t lineno = 0;
    io.each_line(c.input, false, [&](const std::string& l) {
        ++lineno;
        std::istringstream fields(l);
        std::vector<TokenId> ids;
        std::string f;
        while (fields >> f) {
            std::size_t used = 0;
            unsigned long long v = 0;
            try {
                v = std::stoull(f, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != f.size() || v > 0xFFFFFFFFull)
                throw ValidationError("decode: line " + std::to_string(lineno) + ": bad id '" + f + "'");
            ids.push_back(static_cast<TokenId>(v));
        }
        out += tok.decode(ids) + "\n";
    });
    io.emit(c.output, out);
}

void cmd_syllabify(const CliConfig& c, const Io& io) {
    auto schemas = load_schemas(c.schemas);
    std::string out;
    io.each_line(c.input, c.nfc, [&](const std::string& l) {
        const std::u32string cps = decode_utf8(l);
        std::vector<Syllable> syl = c.direct ? syllabify(cps, schemas.front()) : syllabify_text(cps, schemas);
        json arr = json::array();
        for (const auto& s : syl) arr.push_back(encode_utf8(s.text));
        out += dump(arr) + "\n";
    });
    io.emit(c.output, out);
}

void cmd_route(const CliConfig& c, const Io& io) {
    auto schemas = load_schemas(c.schemas);
    std::string out;
    bool first = true;
    io.each_line(c.input, c.nfc, [&](const std::string& l) {
        if (!first) out += "\n";
        first = false;
        for (const auto& seg : route(decode_utf8(l), schemas)) {
            out += script_name(seg.script, schemas) + "\t" + (seg.leading_space ? "space" : "-") + "\t" +
                   dump(json(encode_utf8(seg.text))) + "\n";
        }
    });
    io.emit(c.output, out);
}

/// "label=path" or a bare path labelled by its file stem.
std::pair<std::string, std::string> labelled(const std::string& arg) {
    if (auto eq = arg.find('='); eq != std::string::npos && eq > 0) return {arg.substr(0, eq), arg.substr(eq + 1)};
    std::string stem = fs::path(arg).stem().string();
    return {stem.empty() ? arg : stem, arg};
}

void cmd_eval(const CliConfig& c, const Io& io) {
    if (c.corpora.empty()) throw ValidationError("eval: at least one --corpus is required");
    const std::string fmt = c.format.empty() ? "table" : c.format;
    if (fmt != "table" && fmt != "json") throw ValidationError("eval: --format must be table or json");
    EvalOptions opts;
    opts.bucket_by = parse_bucket_by(c.bucket_by);
    opts.words.danda_splits_words = c.danda_splits_words;
    opts.threads = c.threads;
    std::vector<std::pair<std::string, std::string>> baseline_files;
    for (const auto& b : c.baselines) baseline_files.push_back(labelled(b));
    auto tok = open_tokenizer(c);
    for (const auto& [name, path] : baseline_files) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw Error("cannot read baseline counts " + path);
        std::stringstream ss;
        ss << f.rdbuf();
        opts.baselines.push_back(parse_baseline_counts(ss.str(), name));
    }
    std::vector<EvalInput> inputs;
    for (const auto& arg : c.corpora) {
        auto [label, path] = labelled(arg);
        inputs.push_back({label, io.lines(path, c.nfc)});
    }
    EvalReport r = evaluate(tok, inputs, opts);
    io.emit(c.output, fmt == "json" ? r.to_json() : r.to_table());
}

std::string schema_summary(const LanguageSchema& s) {
    const auto& d = s.definition();
    std::ostringstream o;
    o << "schema " << d.name << "\n";
    o << "  blocks:";
    for (const auto& b : d.blocks) o << " " << format_range(b);
    o << "\n  joiners:";
    for (char32_t j : d.joiners) o << " " << codepoint_label(j);
    o << "\n  classes: " << s.tags() << "\n";
    o << "  states: " << d.states.size() << " (" << d.accept_states.size() << " accepting), transitions "
      << d.transitions.size() << "\n";
    o << "  grammar: " << d.grammar << "\n";
    auto violations = validate_schema(s);
    o << "  valid: " << (violations.empty() ? "yes" : "no") << "\n";
    for (const auto& v : violations) o << "    " << v << "\n";
    return o.str();
}

void cmd_inspect(const CliConfig& c, const Io& io) {
    std::ostringstream o;
    if (c.tokenizer.empty()) {
        for (const auto& name : c.schemas.empty() ? std::vector<std::string>{"sinhala", "devanagari"} : c.schemas) {
            const fs::path p = resolve_schema_path(name);
            LanguageSchema s = LanguageSchema::compile(parse_schema_definition(
                [&] {
                    std::ifstream f(p, std::ios::binary);
                    std::stringstream ss;
                    ss << f.rdbuf();
                    return ss.str();
                }(),
                p.string()));
            o << schema_summary(s);
            if (!validate_schema(s).empty()) {
                io.out() << o.str();
                throw ValidationError("schema " + name + " failed validation");
            }
        }
        io.out() << o.str();
        return;
    }
    auto tok = open_tokenizer(c);
    const auto& d = tok.foundation().descriptor();
    const auto& m = tok.sgpe();
    o << "tokenizer " << c.tokenizer << "\n";
    o << "foundation: " << d.kind << " " << d.name << ", V_BPE " << tok.offset();
    if (!d.sha256.empty()) o << ", sha256 " << d.sha256;
    o << "\n";
    o << "sgpe: V_SGPE " << m.size() << " (incl. [UNK] and space), merges " << m.merges().size() << ", prune "
      << m.prune_threshold() << " (" << to_string(m.prune_scope()) << ")"
      << (m.vocab_exhausted() ? ", pairs exhausted" : "") << "\n";
    o << "total vocab: " << tok.total_vocab_size() << "\n";
    o << "id ranges: BPE [0, " << tok.offset() << "), SGPE [" << tok.offset() << ", " << tok.total_vocab_size()
      << ")\n";
    o << "[UNK] id " << tok.offset() + SgpeModel::kUnkId << ", space id " << tok.offset() + SgpeModel::kSpaceId
      << "\n";
    for (const auto& s : tok.schemas()) o << schema_summary(s);
    io.out() << o.str();
    if (!c.export_vocab.empty()) io.emit(c.export_vocab, tok.meta_vocab_json());
    if (!c.export_sgpe_vocab.empty()) io.emit(c.export_sgpe_vocab, tok.sgpe_vocab_json());
    if (!c.export_merges.empty()) io.emit(c.export_merges, tok.merges_text());
}

} // namespace

int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
    CliConfig c;
    CLI::App app{"Syllable-aware tokenizer for Abugida scripts"};
    app.set_version_flag("--version", WWHO_VERSION);
    app.require_subcommand(1, 1);

    auto schema_opt = [&](CLI::App* sub) {
        sub->add_option("--schema", c.schemas, "Schema name or path (repeatable)");
    };
    auto nfc_opt = [&](CLI::App* sub) { sub->add_flag("--nfc", c.nfc, "NFC-normalize input lines"); };
    auto io_opts = [&](CLI::App* sub) {
        sub->add_option("--input,-i", c.input, "Input file, '-' for stdin");
        sub->add_option("--output,-o", c.output, "Output file, '-' for stdout");
    };

    auto* train = app.add_subcommand("train", "Train an SGPE model and write tokenizer.json");
    schema_opt(train);
    nfc_opt(train);
    train->add_option("--corpus", c.corpora, "Training corpus, one sentence per line (repeatable)");
    train->add_option("--vocab-size", c.vocab_size, "SGPE vocabulary size including specials");
    train->add_option("--prune", c.prune, "Minimum base-unit frequency");
    train->add_option("--prune-scope", c.prune_scope, "Which base units pruning applies to")
        ->check(CLI::IsMember({"all", "syllables"}));
    train->add_option("--foundation", c.foundation, "Foundation backend")->check(CLI::IsMember({"byte", "rank"}));
    train->add_option("--rank-file", c.rank_file, "Rank file for --foundation rank");
    train->add_option("--rank-config", c.rank_config, "Sidecar config for the rank file");
    train->add_option("--out", c.tokenizer, "Output tokenizer.json");
    train->add_option("--threads", c.threads, "Worker threads")->check(CLI::Range(1u, 1024u));
    train->add_option("--seed", c.seed, "Accepted for interface stability; training is deterministic");

    auto* encode = app.add_subcommand("encode", "Encode lines to meta ids");
    encode->add_option("--tokenizer", c.tokenizer, "tokenizer.json");
    io_opts(encode);
    nfc_opt(encode);
    encode->add_option("--format", c.format, "ids or tokens");

    auto* decode = app.add_subcommand("decode", "Decode lines of meta ids");
    decode->add_option("--tokenizer", c.tokenizer, "tokenizer.json");
    io_opts(decode);

    auto* syl = app.add_subcommand("syllabify", "Print the syllables of each line");
    schema_opt(syl);
    io_opts(syl);
    nfc_opt(syl);
    syl->add_flag("--direct", c.direct, "Scan whole lines with the first schema, without routing");

    auto* rt = app.add_subcommand("route", "Print the script segments of each line");
    schema_opt(rt);
    io_opts(rt);
    nfc_opt(rt);

    auto* ev = app.add_subcommand("eval", "Token-count report over labelled corpora");
    ev->add_option("--tokenizer", c.tokenizer, "tokenizer.json");
    ev->add_option("--corpus", c.corpora, "[label=]path (repeatable)");
    ev->add_option("--baseline-counts", c.baselines, "[name=]path with '<bucket> <count>' lines (repeatable)");
    ev->add_option("--bucket-by", c.bucket_by, "file or token-script")
        ->check(CLI::IsMember({"file", "token-script"}));
    ev->add_flag("--danda-splits-words", c.danda_splits_words, "Count danda as a word separator");
    ev->add_option("--format", c.format, "table or json");
    ev->add_option("--output,-o", c.output, "Output file, '-' for stdout");
    ev->add_option("--threads", c.threads, "Worker threads")->check(CLI::Range(1u, 1024u));
    nfc_opt(ev);

    auto* ins = app.add_subcommand("inspect", "Summarize a tokenizer or schemas");
    ins->add_option("--tokenizer", c.tokenizer, "tokenizer.json");
    schema_opt(ins);
    ins->add_option("--export-vocab", c.export_vocab, "Write meta id -> token JSON");
    ins->add_option("--export-sgpe-vocab", c.export_sgpe_vocab, "Write SGPE token -> local id JSON");
    ins->add_option("--export-merges", c.export_merges, "Write merges.txt");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    Io io(in, out);
    try {
        if (train->parsed()) cmd_train(c, io);
        else if (encode->parsed()) cmd_encode(c, io);
        else if (decode->parsed()) cmd_decode(c, io);
        else if (syl->parsed()) cmd_syllabify(c, io);
        else if (rt->parsed()) cmd_route(c, io);
        else if (ev->parsed()) cmd_eval(c, io);
        else if (ins->parsed()) cmd_inspect(c, io);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    out.flush();
    return 0;
}

} // namespace wwho
