#include "wwho/metatok.hpp"

#include <set>

#include "json_util.hpp"
#include "wwho/digest.hpp"
#include "wwho/error.hpp"
#include "wwho/router.hpp"
#include "wwho/utf8.hpp"

namespace wwho {

using detail::ojson;

const char* to_string(IdSpace s) noexcept {
    return s == IdSpace::kBpe ? "BPE" : "SGPE";
}

MetaTokenizer::MetaTokenizer(std::shared_ptr<const FoundationTokenizer> foundation, SgpeModel sgpe,
                             std::vector<LanguageSchema> schemas)
    : foundation_(std::move(foundation)), sgpe_(std::move(sgpe)), schemas_(std::move(schemas)) {
    if (!foundation_) throw ValidationError("meta tokenizer needs a foundation backend");
    std::vector<std::string> names;
    for (const auto& s : schemas_) names.push_back(s.name());
    if (names != sgpe_.schema_names())
        throw ValidationError("schemas do not match the scripts the SGPE model was trained on");
    for (std::size_t a = 0; a < schemas_.size(); ++a) {
        for (std::size_t b = a + 1; b < schemas_.size(); ++b) {
            for (const auto& ra : schemas_[a].definition().blocks) {
                for (const auto& rb : schemas_[b].definition().blocks) {
                    if (ra.first <= rb.last && rb.first <= ra.last)
                        throw ValidationError("schemas " + schemas_[a].name() + " and " + schemas_[b].name() +
                                              " declare overlapping blocks");
                }
            }
        }
    }
}

IdSpace MetaTokenizer::space_of(TokenId meta_id) const {
    if (meta_id < offset()) return IdSpace::kBpe;
    if (meta_id < total_vocab_size()) return IdSpace::kSgpe;
    throw RangeError("meta id out of range: " + std::to_string(meta_id));
}

TokenId MetaTokenizer::to_meta(IdSpace space, TokenId local) const {
    if (space == IdSpace::kBpe) {
        if (local >= offset()) throw RangeError("BPE id out of range: " + std::to_string(local));
        return local;
    }
    if (local >= sgpe_.size()) throw RangeError("SGPE id out of range: " + std::to_string(local));
    return static_cast<TokenId>(offset() + local);
}

TokenId MetaTokenizer::to_local(TokenId meta_id) const {
    return space_of(meta_id) == IdSpace::kBpe ? meta_id : static_cast<TokenId>(meta_id - offset());
}

std::vector<TokenId> MetaTokenizer::encode(std::string_view text) const {
    std::vector<TokenId> out;
    const std::u32string cps = decode_utf8(text);
    const auto off = static_cast<TokenId>(offset());
    for (const auto& seg : route(cps, schemas_)) {
        if (seg.is_other()) {
            auto ids = foundation_->encode(encode_utf8(seg.text));
            out.insert(out.end(), ids.begin(), ids.end());
        } else {
            auto syl = syllabify(seg.text, schemas_[static_cast<std::size_t>(seg.script)]);
            for (TokenId id : sgpe_.encode(syl)) out.push_back(off + id);
        }
    }
    return out;
}

std::string MetaTokenizer::decode(std::span<const TokenId> ids) const {
    std::string out;
    std::size_t i = 0;
    while (i < ids.size()) {
        const IdSpace space = space_of(ids[i]);
        std::size_t j = i;
        std::vector<TokenId> run;
        while (j < ids.size() && space_of(ids[j]) == space) run.push_back(to_local(ids[j++]));
        out += space == IdSpace::kBpe ? foundation_->decode(run) : sgpe_.decode(run);
        i = j;
    }
    return out;
}

std::vector<TokenInfo> MetaTokenizer::token_strings(std::string_view text) const {
    std::vector<TokenInfo> out;
    const std::u32string cps = decode_utf8(text);
    for (const auto& seg : route(cps, schemas_)) {
        if (seg.is_other()) {
            for (TokenId id : foundation_->encode(encode_utf8(seg.text)))
                out.push_back({foundation_->token_bytes(id), id, IdSpace::kBpe, kOtherScript});
        } else {
            auto syl = syllabify(seg.text, schemas_[static_cast<std::size_t>(seg.script)]);
            for (TokenId id : sgpe_.encode(syl))
                out.push_back({sgpe_.token(id), to_meta(IdSpace::kSgpe, id), IdSpace::kSgpe, seg.script});
        }
    }
    return out;
}

namespace {

ojson sgpe_payload(const SgpeModel& m) {
    ojson merges = ojson::array();
    for (const auto& r : m.merges()) merges.push_back(ojson::array({r.left, r.right}));
    return ojson{{"vocab", m.vocab()}, {"merges", merges}};
}

std::string checksum(const ojson& payload) {
    return sha256_hex(payload.dump());
}

std::string relative_path(const std::string& p, const std::filesystem::path& base) {
    if (p.empty() || base.empty()) return p;
    namespace fs = std::filesystem;
    const fs::path rel = fs::absolute(p).lexically_normal().lexically_relative(fs::absolute(base).lexically_normal());
    return rel.empty() ? p : rel.generic_string();
}

} // namespace

std::string MetaTokenizer::to_json(const std::filesystem::path& relative_to) const {
    const auto& d = foundation_->descriptor();
    ojson doc;
    doc["format"] = "wwho-tokenizer";
    doc["version"] = kTokenizerFormatVersion;
    doc["foundation"] = {{"kind", d.kind},         {"name", d.name},           {"vocab_size", d.vocab_size},
                         {"sha256", d.sha256},
                         {"rank_file", relative_path(d.rank_file, relative_to)},
                         {"config_file", relative_path(d.config_file, relative_to)}};
    ojson schemas = ojson::array();
    for (const auto& s : schemas_) schemas.push_back(detail::schema_to_json_value(s.definition()));
    doc["schemas"] = schemas;

    ojson payload = sgpe_payload(sgpe_);
    ojson sgpe;
    sgpe["prune_threshold"] = sgpe_.prune_threshold();
    sgpe["prune_scope"] = to_string(sgpe_.prune_scope());
    sgpe["unk_token"] = SgpeModel::kUnkToken;
    sgpe["space_token"] = SgpeModel::kSpaceToken;
    sgpe["vocab_exhausted"] = sgpe_.vocab_exhausted();
    sgpe["checksum"] = checksum(payload);
    sgpe["vocab"] = payload["vocab"];
    sgpe["merges"] = payload["merges"];
    doc["sgpe"] = sgpe;
    doc["meta"] = {{"offset", offset()}, {"sgpe_vocab_size", sgpe_.size()}, {"total_vocab_size", total_vocab_size()}};
    return doc.dump(1) + "\n";
}

void MetaTokenizer::save(const std::filesystem::path& path) const {
    std::filesystem::path dir = path.parent_path();
    if (dir.empty()) dir = ".";
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    detail::write_file(path.string(), to_json(dir));
}

MetaTokenizer MetaTokenizer::from_json(std::string_view json_text, const std::filesystem::path& base_dir) {
    ojson doc;
    try {
        doc = ojson::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("tokenizer.json: ") + e.what());
    }
    try {
        if (doc.value("format", "") != "wwho-tokenizer") throw ParseError("tokenizer.json: not a wwho tokenizer file");
        if (doc.at("version").get<int>() != kTokenizerFormatVersion)
            throw ValidationError("tokenizer.json: unsupported format version " + doc.at("version").dump());

        const auto& f = doc.at("foundation");
        FoundationDescriptor d{f.at("kind").get<std::string>(),        f.at("name").get<std::string>(),
                               f.at("vocab_size").get<std::size_t>(),  f.at("sha256").get<std::string>(),
                               f.at("rank_file").get<std::string>(),   f.at("config_file").get<std::string>()};

        std::vector<LanguageSchema> schemas;
        for (const auto& s : doc.at("schemas")) {
            auto schema = LanguageSchema::compile(detail::schema_from_json_value(s, "tokenizer.json"));
            auto violations = validate_schema(schema);
            if (!violations.empty()) throw ValidationError("tokenizer.json: embedded schema invalid: " + violations.front());
            schemas.push_back(std::move(schema));
        }

        const auto& sg = doc.at("sgpe");
        ojson payload{{"vocab", sg.at("vocab")}, {"merges", sg.at("merges")}};
        if (checksum(payload) != sg.at("checksum").get<std::string>())
            throw ValidationError("tokenizer.json: SGPE checksum mismatch (vocab or merges were modified)");
        if (sg.at("unk_token").get<std::string>() != SgpeModel::kUnkToken ||
            sg.at("space_token").get<std::string>() != SgpeModel::kSpaceToken)
            throw ValidationError("tokenizer.json: unexpected special tokens");

        std::vector<std::pair<std::string, std::string>> merges;
        for (const auto& m : sg.at("merges")) merges.emplace_back(m.at(0).get<std::string>(), m.at(1).get<std::string>());
        std::vector<std::string> names;
        for (const auto& s : schemas) names.push_back(s.name());
        SgpeModel model = SgpeModel::from_parts(sg.at("vocab").get<std::vector<std::string>>(), std::move(merges),
                                                sg.at("prune_threshold").get<std::int64_t>(),
                                                parse_prune_scope(sg.at("prune_scope").get<std::string>()),
                                                std::move(names), sg.value("vocab_exhausted", false));

        const auto& meta = doc.at("meta");
        const auto offset = meta.at("offset").get<std::size_t>();
        const auto sgpe_size = meta.at("sgpe_vocab_size").get<std::size_t>();
        const auto total = meta.at("total_vocab_size").get<std::size_t>();
        if (offset != d.vocab_size || sgpe_size != model.size() || total != offset + sgpe_size)
            throw ValidationError("tokenizer.json: total vocab " + std::to_string(total) + " != V_BPE " +
                                  std::to_string(d.vocab_size) + " + V_SGPE " + std::to_string(model.size()));

        return MetaTokenizer(open_foundation(d, base_dir), std::move(model), std::move(schemas));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("tokenizer.json: ") + e.what());
    }
}

MetaTokenizer MetaTokenizer::load(const std::filesystem::path& path) {
    return from_json(detail::read_file(path.string()), path.parent_path());
}

std::string MetaTokenizer::sgpe_vocab_json() const {
    ojson out = ojson::object();
    for (std::size_t i = 0; i < sgpe_.size(); ++i) out[sgpe_.vocab()[i]] = i;
    return out.dump(1, ' ', false, ojson::error_handler_t::replace) + "\n";
}

std::string MetaTokenizer::meta_vocab_json() const {
    ojson out = ojson::object();
    for (TokenId id = 0; id < offset(); ++id) {
        std::string bytes;
        try {
            bytes = foundation_->token_bytes(id);
        } catch (const RangeError&) {
            continue;  // unused id in a sparse rank file
        }
        out[std::to_string(id)] = bytes;
    }
    for (std::size_t i = 0; i < sgpe_.size(); ++i) out[std::to_string(offset() + i)] = sgpe_.vocab()[i];
    return out.dump(1, ' ', false, ojson::error_handler_t::replace) + "\n";
}

std::string MetaTokenizer::merges_text() const {
    auto esc = [](const std::string& s) {
        std::string o;
        for (char c : s) {
            if (c == ' ') o += "\\s";
            else if (c == '\\') o += "\\\\";
            else if (c == '\n') o += "\\n";
            else if (c == '\t') o += "\\t";
            else o.push_back(c);
        }
        return o;
    };
    std::string out;
    for (const auto& r : sgpe_.merges()) out += esc(r.left) + " " + esc(r.right) + "\n";
    return out;
}

} // namespace wwho
