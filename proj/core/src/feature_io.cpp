#include "spectrum/feature_io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "spectrum/text.hpp"
#include <json.hpp>

namespace spectrum {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'F', 'T'};
constexpr uint32_t kVersion = 1;
// Caps a single tensor at 2^31 elements; anything above is a corrupt header.
constexpr uint64_t kMaxElements = (1ull << 31);

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

bool get_u32(std::istream& is, uint32_t& v) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
    v = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
        (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    return true;
}

void put_f32(std::ostream& os, float f) {
    uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(os, v);
}

bool get_f32(std::istream& is, float& f) {
    uint32_t v;
    if (!get_u32(is, v)) return false;
    std::memcpy(&f, &v, 4);
    return true;
}

} // namespace

const char* modality_name(Modality m) {
    switch (m) {
        case Modality::appearance: return "appearance";
        case Modality::motion: return "motion";
        case Modality::audio: return "audio";
        case Modality::embedding: return "embedding";
        case Modality::generic: return "generic";
    }
    return "generic";
}

void save_spft(const std::string& path, Modality code, const std::vector<uint32_t>& dims,
               const std::vector<float>& payload) {
    uint64_t n = 1;
    for (uint32_t d : dims) n *= d;
    if (n != payload.size())
        throw dimension_error("spft save: dims disagree with payload size for " + path);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("spft: cannot open for writing: " + path);
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    os.put(static_cast<char>(code));
    put_u32(os, static_cast<uint32_t>(dims.size()));
    for (uint32_t d : dims) put_u32(os, d);
    for (float f : payload) put_f32(os, f);
    if (!os) throw std::runtime_error("spft: write failed: " + path);
}

void load_spft(const std::string& path, Modality& code, std::vector<uint32_t>& dims,
               std::vector<float>& payload) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("spft: cannot open: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw bad_magic_error("spft: bad magic in " + path);
    uint32_t version;
    if (!get_u32(is, version)) throw truncation_error("spft: truncated header in " + path);
    if (version != kVersion)
        throw bad_magic_error("spft: unsupported version " + std::to_string(version) + " in " +
                              path);
    int code_byte = is.get();
    if (code_byte == EOF) throw truncation_error("spft: truncated header in " + path);
    code = static_cast<Modality>(static_cast<uint8_t>(code_byte));
    uint32_t rank;
    if (!get_u32(is, rank)) throw truncation_error("spft: truncated header in " + path);
    if (rank > 8) throw dimension_error("spft: rank " + std::to_string(rank) + " in " + path);
    dims.resize(rank);
    uint64_t n = 1;
    for (uint32_t i = 0; i < rank; ++i) {
        if (!get_u32(is, dims[i])) throw truncation_error("spft: truncated dims in " + path);
        n *= dims[i];
        if (n > kMaxElements)
            throw dimension_error("spft: dimension overflow (" + std::to_string(n) +
                                  " elements) in " + path);
    }
    payload.resize(n);
    for (uint64_t i = 0; i < n; ++i)
        if (!get_f32(is, payload[i]))
            throw truncation_error("spft: payload truncated at element " + std::to_string(i) +
                                   " of " + std::to_string(n) + " in " + path);
}

void save_feature_tensor(const std::string& path, const FeatureSequence& f) {
    save_spft(path, f.modality,
              {static_cast<uint32_t>(f.tokens), static_cast<uint32_t>(f.width)}, f.matrix);
}

FeatureSequence load_feature_tensor(const std::string& path) {
    Modality code;
    std::vector<uint32_t> dims;
    std::vector<float> payload;
    load_spft(path, code, dims, payload);
    if (dims.size() != 2)
        throw dimension_error("feature tensor: expected rank 2, got rank " +
                              std::to_string(dims.size()) + " in " + path);
    FeatureSequence f;
    f.modality = code;
    f.tokens = dims[0];
    f.width = dims[1];
    f.matrix = std::move(payload);
    return f;
}

std::string Corpus::resolve(const std::string& rel) const {
    std::filesystem::path p(rel);
    if (p.is_absolute() || base_dir.empty()) return rel;
    return (std::filesystem::path(base_dir) / p).string();
}

namespace {

std::vector<float> to_floats(const nlohmann::json& arr) {
    std::vector<float> out;
    out.reserve(arr.size());
    for (const auto& v : arr) out.push_back(v.get<float>());
    return out;
}

} // namespace

Corpus load_manifest(const std::string& path, int l_max) {
    std::ifstream is(path);
    if (!is) throw manifest_error("manifest: cannot open " + path);
    Corpus corpus;
    corpus.base_dir = std::filesystem::path(path).parent_path().string();
    std::string line;
    int line_no = 0;
    const size_t max_content = l_max >= 2 ? static_cast<size_t>(l_max - 2) : 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw manifest_error("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        auto require = [&](const char* key) -> const nlohmann::json& {
            if (!j.contains(key))
                throw manifest_error("manifest line " + std::to_string(line_no) +
                                     ": missing key '" + key + "'");
            return j.at(key);
        };
        CorpusItem item;
        item.video_id = require("video_id").get<std::string>();
        item.appearance_path = require("appearance").get<std::string>();
        item.motion_path = require("motion").get<std::string>();
        item.audio_path = require("audio").get<std::string>();
        item.field_label = require("field").get<int>();
        for (const auto& cap : require("captions")) {
            auto toks = tokenize(cap.get<std::string>());
            if (toks.size() > max_content) toks.resize(max_content);
            item.captions.push_back(std::move(toks));
        }
        if (item.captions.empty())
            throw manifest_error("manifest line " + std::to_string(line_no) + ": no captions");
        if (j.contains("caption_embeddings")) {
            for (const auto& e : j.at("caption_embeddings"))
                item.caption_embeddings.push_back(to_floats(e));
            if (item.caption_embeddings.size() != item.captions.size())
                throw manifest_error("manifest line " + std::to_string(line_no) +
                                     ": caption_embeddings length does not match captions");
        }
        if (j.contains("video_embedding")) item.video_embedding = to_floats(j.at("video_embedding"));
        corpus.items.push_back(std::move(item));
    }
    return corpus;
}

} // namespace spectrum
