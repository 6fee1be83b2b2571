#include "spectrum/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include "spectrum/feature_io.hpp"
#include "spectrum/hash.hpp"
#include <json.hpp>

namespace spectrum {

namespace {

std::string sanitize(const std::string& name) {
    std::string out = name;
    for (char& c : out)
        if (c == '.' || c == '/') c = '_';
    return out;
}

} // namespace

void save_checkpoint(const std::string& dir, SpectrumModel& model, const Config& config,
                     const Vocabulary& vocab, const AttributeVocabulary& attrs,
                     const EmotionLexicon& lexicon, const FieldTaxonomy& taxonomy) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "params");

    auto params = model.all_params();
    nlohmann::ordered_json header;
    header["format_version"] = 1;
    header["structure_hash"] = structure_hash(model.dims());
    header["config"] = nlohmann::ordered_json::parse(config.to_json());
    nlohmann::ordered_json dims;
    dims["vocab"] = model.dims().vocab;
    dims["n_att"] = model.dims().n_att;
    dims["n_ctg"] = model.dims().n_ctg;
    dims["n_fld"] = model.dims().n_fld;
    header["dims"] = dims;
    header["vocab"] = vocab.tokens();
    nlohmann::ordered_json attr_list = nlohmann::ordered_json::array();
    for (const auto& a : attrs.attributes()) {
        nlohmann::ordered_json e;
        e["word"] = a.word;
        e["emotional"] = a.emotional;
        e["category"] = a.category;
        attr_list.push_back(e);
    }
    header["attributes"] = attr_list;
    nlohmann::ordered_json lex;
    for (const auto& c : lexicon.categories()) lex[c.name] = c.words;
    header["lexicon"] = lex;
    header["taxonomy"] = taxonomy.names();

    nlohmann::ordered_json plist = nlohmann::ordered_json::array();
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        char prefix[8];
        std::snprintf(prefix, sizeof(prefix), "%03zu_", i);
        const std::string file = "params/" + std::string(prefix) + sanitize(p.name) + ".spft";
        save_spft((fs::path(dir) / file).string(), Modality::generic,
                  {static_cast<uint32_t>(p.tensor.rows()), static_cast<uint32_t>(p.tensor.cols())},
                  p.tensor.data());
        nlohmann::ordered_json e;
        e["name"] = p.name;
        e["rows"] = p.tensor.rows();
        e["cols"] = p.tensor.cols();
        e["file"] = file;
        plist.push_back(e);
    }
    header["params"] = plist;

    std::ofstream os((fs::path(dir) / "header.json").string(), std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot write header in " + dir);
    os << header.dump(2) << "\n";
}

CheckpointBundle load_checkpoint(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream is((fs::path(dir) / "header.json").string());
    if (!is) throw std::runtime_error("checkpoint: cannot open header in " + dir);
    nlohmann::json header = nlohmann::json::parse(is);

    CheckpointBundle bundle;
    bundle.config = Config::from_json(header.at("config").dump());

    std::vector<EmotionLexicon::Category> cats;
    // nlohmann::json sorts object keys; rebuild category order from an
    // ordered reparse of the header to keep indices stable
    {
        std::ifstream is2((fs::path(dir) / "header.json").string());
        nlohmann::ordered_json oh = nlohmann::ordered_json::parse(is2);
        for (auto it = oh.at("lexicon").begin(); it != oh.at("lexicon").end(); ++it) {
            EmotionLexicon::Category c;
            c.name = it.key();
            for (const auto& w : it.value()) c.words.push_back(w.get<std::string>());
            cats.push_back(std::move(c));
        }
    }
    bundle.lexicon = EmotionLexicon::from_categories(std::move(cats));

    std::vector<std::string> field_names;
    for (const auto& n : header.at("taxonomy")) field_names.push_back(n.get<std::string>());
    bundle.taxonomy = FieldTaxonomy::from_names(std::move(field_names));

    std::vector<std::string> vocab_tokens;
    for (const auto& t : header.at("vocab")) vocab_tokens.push_back(t.get<std::string>());
    bundle.vocab = Vocabulary::from_tokens(vocab_tokens);

    std::vector<AttributeVocabulary::Attribute> attrs;
    for (const auto& e : header.at("attributes")) {
        AttributeVocabulary::Attribute a;
        a.word = e.at("word").get<std::string>();
        a.emotional = e.at("emotional").get<bool>();
        a.category = e.at("category").get<int>();
        attrs.push_back(std::move(a));
    }
    bundle.attrs = AttributeVocabulary::from_attributes(std::move(attrs), bundle.lexicon.size());

    ModelDims dims;
    dims.d_h = bundle.config.d_h;
    dims.d_b = bundle.config.d_b;
    dims.d_e = bundle.config.d_e;
    dims.heads = bundle.config.heads;
    dims.n_layers = bundle.config.n_layers;
    dims.l_max = bundle.config.l_max;
    dims.vocab = header.at("dims").at("vocab").get<int64_t>();
    dims.n_att = header.at("dims").at("n_att").get<int64_t>();
    dims.n_ctg = header.at("dims").at("n_ctg").get<int64_t>();
    dims.n_fld = header.at("dims").at("n_fld").get<int64_t>();
    dims.k_top = bundle.config.k_top;
    bundle.dims = dims;

    const uint64_t stored_hash = header.at("structure_hash").get<uint64_t>();
    if (stored_hash != structure_hash(dims))
        throw checkpoint_mismatch_error("checkpoint: structure hash mismatch in " + dir);

    bundle.model = SpectrumModel(dims, bundle.config.seed);
    auto params = bundle.model.all_params();
    const auto& plist = header.at("params");
    if (plist.size() != params.size())
        throw checkpoint_mismatch_error("checkpoint: parameter count mismatch in " + dir);
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& e = plist.at(i);
        if (e.at("name").get<std::string>() != params[i].name)
            throw checkpoint_mismatch_error("checkpoint: parameter order mismatch at '" +
                                            params[i].name + "'");
        Modality code;
        std::vector<uint32_t> tdims;
        std::vector<float> payload;
        load_spft((fs::path(dir) / e.at("file").get<std::string>()).string(), code, tdims, payload);
        if (tdims.size() != 2 || static_cast<int64_t>(tdims[0]) != params[i].tensor.rows() ||
            static_cast<int64_t>(tdims[1]) != params[i].tensor.cols())
            throw checkpoint_mismatch_error("checkpoint: tensor shape mismatch for '" +
                                            params[i].name + "'");
        params[i].tensor.data() = std::move(payload);
    }
    return bundle;
}

void check_structure(const CheckpointBundle& bundle, const Config& requested, bool force) {
    ModelDims want = bundle.dims;
    want.d_h = requested.d_h;
    want.d_b = requested.d_b;
    want.d_e = requested.d_e;
    want.heads = requested.heads;
    want.n_layers = requested.n_layers;
    want.l_max = requested.l_max;
    want.k_top = requested.k_top;
    if (structure_hash(want) != structure_hash(bundle.dims)) {
        if (!force)
            throw checkpoint_mismatch_error(
                "checkpoint: requested structural config disagrees with checkpoint (use --force "
                "to override)");
    }
}

} // namespace spectrum
