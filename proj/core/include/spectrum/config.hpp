#pragma once

#include <cstdint>
#include <string>

#include "spectrum/model.hpp"

namespace spectrum {

// Runtime configuration mirrored by the CLI flags (kebab-case).
struct Config {
    // model widths
    int d_h = 64;
    int d_b = 32;
    int d_e = 32; // coarse-to-fine intermediate width, defaults to d_h/2
    int d_r = 64; // retrieval embedding width
    int n_layers = 2;
    int heads = 4;
    // counts
    int n_t = 3;
    int top_k_factual = 300;
    int k_top = 10;
    // training (desk-scale defaults; --paper-hparams restores the
    // published schedule: lr 5e-7, batch 128, epochs 50)
    double lr = 1e-3;
    int batch = 16;
    int epochs = 30;
    double weight_decay = 0.001;
    double lr_decay = 0.9; // per epoch
    uint64_t seed = 12345;
    // decoding
    int beam = 5;
    int l_max = 30;
    // ablation switches
    bool visual = true;
    bool audio = true;
    bool text = true;
    bool vtai = true;
    bool cfb = true;
    bool aeb = true;
    bool field_emb = true;
    bool emotion_emb = true;
    std::string rho_mode = "ground_truth"; // or "predicted"
    double lambda_field = 0.1;
    bool exclude_self = true; // training-time retrieval self-exclusion
    int threads = 0;          // evaluation decode threads; 0 = hardware

    // Enforces flag consistency (aeb off forces k_top = 0, vtai off forces
    // cfb/aeb off, positive counts). Throws on contradictions.
    void validate();

    void apply_paper_hparams();

    // SPECTRUM_SEED environment override
    void apply_env_seed();

    AblationFlags flags() const;
    RhoMode rho() const;

    std::string to_json() const;
    static Config from_json(const std::string& text);
    static Config load(const std::string& path);
};

// Hash of the structural dimensions a checkpoint must agree on.
uint64_t structure_hash(const ModelDims& dims);

} // namespace spectrum
