#include "spectrum/config.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "spectrum/hash.hpp"
#include <json.hpp>

namespace spectrum {

void Config::validate() {
    auto positive = [](int v, const char* name) {
        if (v < 1) throw std::runtime_error(std::string("config: ") + name + " must be positive");
    };
    positive(d_h, "d-h");
    positive(d_b, "d-b");
    positive(d_e, "d-e");
    positive(d_r, "d-r");
    positive(n_layers, "n-layers");
    positive(heads, "heads");
    positive(n_t, "n-t");
    positive(batch, "batch");
    positive(epochs, "epochs");
    positive(beam, "beam");
    if (l_max < 3) throw std::runtime_error("config: l-max must be at least 3");
    if (d_h % heads != 0) throw std::runtime_error("config: heads must divide d-h");
    if (k_top < 0) throw std::runtime_error("config: k-top must be non-negative");
    if (top_k_factual < 0) throw std::runtime_error("config: top-k-factual must be non-negative");
    if (rho_mode != "ground_truth" && rho_mode != "predicted")
        throw std::runtime_error("config: rho-mode must be ground_truth or predicted");
    if (!vtai) {
        cfb = false;
        aeb = false;
    }
    if (!aeb) k_top = 0;
    if (aeb && k_top == 0) aeb = false;
    if (rho_mode == "predicted" && !vtai)
        throw std::runtime_error("config: predicted rho mode requires the VTAI head");
    if (!visual && !audio && !text)
        throw std::runtime_error("config: at least one modality must stay unmasked");
}

void Config::apply_paper_hparams() {
    lr = 5e-7;
    batch = 128;
    epochs = 50;
}

void Config::apply_env_seed() {
    if (const char* env = std::getenv("SPECTRUM_SEED")) {
        seed = std::strtoull(env, nullptr, 10);
    }
}

AblationFlags Config::flags() const {
    AblationFlags f;
    f.mask.visual = visual;
    f.mask.audio = audio;
    f.mask.text = text;
    f.vtai = vtai;
    f.cfb = cfb;
    f.aeb = aeb;
    f.field_emb = field_emb;
    f.emotion_emb = emotion_emb;
    f.rho_mode = rho();
    f.lambda_field = lambda_field;
    return f;
}

RhoMode Config::rho() const {
    return rho_mode == "predicted" ? RhoMode::predicted : RhoMode::ground_truth;
}

namespace {

nlohmann::ordered_json to_ordered_json(const Config& c) {
    nlohmann::ordered_json j;
    j["d_h"] = c.d_h;
    j["d_b"] = c.d_b;
    j["d_e"] = c.d_e;
    j["d_r"] = c.d_r;
    j["n_layers"] = c.n_layers;
    j["heads"] = c.heads;
    j["n_t"] = c.n_t;
    j["top_k_factual"] = c.top_k_factual;
    j["k_top"] = c.k_top;
    j["lr"] = c.lr;
    j["batch"] = c.batch;
    j["epochs"] = c.epochs;
    j["weight_decay"] = c.weight_decay;
    j["lr_decay"] = c.lr_decay;
    j["seed"] = c.seed;
    j["beam"] = c.beam;
    j["l_max"] = c.l_max;
    j["visual"] = c.visual;
    j["audio"] = c.audio;
    j["text"] = c.text;
    j["vtai"] = c.vtai;
    j["cfb"] = c.cfb;
    j["aeb"] = c.aeb;
    j["field_emb"] = c.field_emb;
    j["emotion_emb"] = c.emotion_emb;
    j["rho_mode"] = c.rho_mode;
    j["lambda_field"] = c.lambda_field;
    j["exclude_self"] = c.exclude_self;
    j["threads"] = c.threads;
    return j;
}

} // namespace

std::string Config::to_json() const { return to_ordered_json(*this).dump(2); }

Config Config::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    Config c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("d_h", c.d_h);
    get("d_b", c.d_b);
    get("d_e", c.d_e);
    get("d_r", c.d_r);
    get("n_layers", c.n_layers);
    get("heads", c.heads);
    get("n_t", c.n_t);
    get("top_k_factual", c.top_k_factual);
    get("k_top", c.k_top);
    get("lr", c.lr);
    get("batch", c.batch);
    get("epochs", c.epochs);
    get("weight_decay", c.weight_decay);
    get("lr_decay", c.lr_decay);
    get("seed", c.seed);
    get("beam", c.beam);
    get("l_max", c.l_max);
    get("visual", c.visual);
    get("audio", c.audio);
    get("text", c.text);
    get("vtai", c.vtai);
    get("cfb", c.cfb);
    get("aeb", c.aeb);
    get("field_emb", c.field_emb);
    get("emotion_emb", c.emotion_emb);
    get("rho_mode", c.rho_mode);
    get("lambda_field", c.lambda_field);
    get("exclude_self", c.exclude_self);
    get("threads", c.threads);
    return c;
}

Config Config::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return from_json(text);
}

uint64_t structure_hash(const ModelDims& dims) {
    // k_top is a selection count, not a tensor shape, so it stays out of
    // the hash and remains overridable at evaluation time
    int64_t fields[] = {dims.d_h,  dims.d_b,  dims.d_e,   dims.heads, dims.n_layers, dims.l_max,
                        dims.vocab, dims.n_att, dims.n_ctg, dims.n_fld};
    return fnv1a64(fields, sizeof(fields));
}

} // namespace spectrum
