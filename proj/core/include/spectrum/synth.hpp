#pragma once

#include <string>
#include <vector>

#include "spectrum/feature_io.hpp"
#include "spectrum/lexicon.hpp"

namespace spectrum {

// Parameters of the synthetic corpus. Features are drawn around Gaussian
// prototypes keyed by (field, emotion category) plus per-word signatures,
// so planted attributes stay statistically recoverable from features.
struct SynthConfig {
    int videos = 200;
    int captions_per_video = 3;
    int d_b = 32; // backbone feature width
    int d_r = 64; // retrieval embedding width
    int n_appearance = 8;
    int n_motion = 4;
    int n_audio = 4;
    int nouns_per_video = 2;
    double feature_noise = 0.3;
    double embed_noise = 0.2;
    double test_fraction = 0.2; // tail of the video list
};

struct PlantedItem {
    int field = 0;
    int category = 0;
    std::string emotion_word;
    std::vector<std::string> factual_words; // nouns + verb
};

struct SynthResult {
    Corpus corpus; // full corpus, embeddings inline
    std::vector<PlantedItem> planted;
    std::string manifest_path;
    std::string train_manifest_path;
    std::string test_manifest_path;
};

// Deterministic for (config, seed): writes features/<id>_*.spft plus
// manifest.jsonl / manifest_train.jsonl / manifest_test.jsonl into out_dir.
SynthResult synth_corpus(const SynthConfig& cfg, uint64_t seed, const EmotionLexicon& lexicon,
                         const FieldTaxonomy& taxonomy, const std::string& out_dir);

} // namespace spectrum
