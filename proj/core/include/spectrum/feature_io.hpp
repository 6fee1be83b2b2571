#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spectrum {

enum class Modality : uint8_t {
    appearance = 0,
    motion = 1,
    audio = 2,
    embedding = 3,
    generic = 255,
};

const char* modality_name(Modality m);

// One modality's pre-extracted features: tokens x width, row-major.
struct FeatureSequence {
    Modality modality = Modality::generic;
    int64_t tokens = 0;
    int64_t width = 0;
    std::vector<float> matrix;

    float at(int64_t t, int64_t c) const { return matrix[static_cast<size_t>(t * width + c)]; }
    float& at(int64_t t, int64_t c) { return matrix[static_cast<size_t>(t * width + c)]; }
};

class bad_magic_error : public std::runtime_error {
  public:
    explicit bad_magic_error(const std::string& msg) : std::runtime_error(msg) {}
};
class truncation_error : public std::runtime_error {
  public:
    explicit truncation_error(const std::string& msg) : std::runtime_error(msg) {}
};
class dimension_error : public std::runtime_error {
  public:
    explicit dimension_error(const std::string& msg) : std::runtime_error(msg) {}
};
class manifest_error : public std::runtime_error {
  public:
    explicit manifest_error(const std::string& msg) : std::runtime_error(msg) {}
};

// SPFT binary tensor format (bit-exact, little-endian):
//   magic "SPFT", u32 version=1, u8 modality code, u32 rank, u32 dims[rank],
//   f32 payload, row-major.
void save_feature_tensor(const std::string& path, const FeatureSequence& f);
FeatureSequence load_feature_tensor(const std::string& path);

// Same container for arbitrary-rank tensors (checkpoints, sidecars).
void save_spft(const std::string& path, Modality code, const std::vector<uint32_t>& dims,
               const std::vector<float>& payload);
void load_spft(const std::string& path, Modality& code, std::vector<uint32_t>& dims,
               std::vector<float>& payload);

struct CorpusItem {
    std::string video_id;
    std::string appearance_path;
    std::string motion_path;
    std::string audio_path;
    std::vector<std::vector<std::string>> captions; // tokenized, truncated
    int field_label = 0;
    std::vector<std::vector<float>> caption_embeddings; // optional, one per caption
    std::vector<float> video_embedding;                 // optional pooled embedding
};

struct Corpus {
    std::vector<CorpusItem> items;
    std::string base_dir; // feature paths are resolved against this

    std::string resolve(const std::string& rel) const;
};

// JSON Lines manifest, one item per line with keys
// {video_id, appearance, motion, audio, captions, field,
//  caption_embeddings?, video_embedding?}.
// Captions are lowercased, split on whitespace/punctuation and truncated to
// l_max-2 content tokens.
Corpus load_manifest(const std::string& path, int l_max = 30);

} // namespace spectrum
