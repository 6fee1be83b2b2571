#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "spectrum/feature_io.hpp"
#include "spectrum/tensor.hpp"
#include "spectrum/text.hpp"

namespace spectrum {

class empty_memory_error : public std::runtime_error {
  public:
    empty_memory_error() : std::runtime_error("all modalities masked: encoder memory is empty") {}
};

// Per-modality projection to model width followed by layer normalization.
template <class S>
struct EncoderParamsT {
    TensorT<S> w;       // d_b x d_h
    TensorT<S> b;       // 1 x d_h
    TensorT<S> ln_gain; // 1 x d_h
    TensorT<S> ln_bias; // 1 x d_h

    static EncoderParamsT init(int64_t d_b, int64_t d_h, Pcg32& rng) {
        EncoderParamsT p;
        p.w = TensorT<S>::glorot(d_b, d_h, rng);
        p.b = TensorT<S>::zeros(1, d_h, true);
        p.ln_gain = TensorT<S>::filled(1, d_h, S(1), true);
        p.ln_bias = TensorT<S>::zeros(1, d_h, true);
        return p;
    }

    int64_t d_b() const { return w.rows(); }
    int64_t d_h() const { return w.cols(); }
};

template <class S>
struct EncodedFeaturesT {
    Modality modality = Modality::generic;
    TensorT<S> matrix; // tokens x d_h
};

// rows * W + b, then layer norm. Shared by every modality encoder.
template <class S>
TensorT<S> encode_rows(const TensorT<S>& rows, const EncoderParamsT<S>& p) {
    if (rows.cols() != p.d_b())
        throw shape_error("encode: input width " + std::to_string(rows.cols()) +
                          " does not match encoder d_b " + std::to_string(p.d_b()));
    auto proj = ops::add_rowvec(ops::matmul(rows, p.w), p.b);
    return ops::layer_norm(proj, p.ln_gain, p.ln_bias);
}

template <class S>
TensorT<S> to_tensor(const FeatureSequence& f) {
    std::vector<S> data(f.matrix.begin(), f.matrix.end());
    return TensorT<S>::from_data(f.tokens, f.width, std::move(data));
}

template <class S>
EncodedFeaturesT<S> encode_modality(const FeatureSequence& f, const EncoderParamsT<S>& p) {
    EncodedFeaturesT<S> out;
    out.modality = f.modality;
    out.matrix = encode_rows(to_tensor<S>(f), p);
    return out;
}

// Each caption becomes the mean of its token embeddings (one d_b row),
// then goes through the shared projection. Empty captions fall back to the
// unk token.
template <class S>
EncodedFeaturesT<S> encode_text(const std::vector<std::vector<int>>& captions,
                                const TensorT<S>& embedding_table, const EncoderParamsT<S>& p) {
    EncodedFeaturesT<S> out;
    out.modality = Modality::generic;
    if (captions.empty()) return out; // undefined matrix = zero rows
    std::vector<TensorT<S>> rows;
    for (const auto& cap : captions) {
        std::vector<int> ids = cap.empty() ? std::vector<int>{Vocabulary::kUnk} : cap;
        rows.push_back(ops::mean_over_rows(ops::gather_rows(embedding_table, ids)));
    }
    out.matrix = encode_rows(ops::concat_rows(rows), p);
    return out;
}

// Token-axis concatenation, appearance rows first. Either side may be
// absent under a modality mask.
template <class S>
EncodedFeaturesT<S> fuse_video(const EncodedFeaturesT<S>& app, const EncodedFeaturesT<S>& mot) {
    EncodedFeaturesT<S> out;
    out.modality = Modality::appearance;
    const bool ha = app.matrix.defined() && app.matrix.rows() > 0;
    const bool hm = mot.matrix.defined() && mot.matrix.rows() > 0;
    if (ha && hm) {
        if (app.matrix.cols() != mot.matrix.cols())
            throw shape_error("fuse_video: width mismatch " + app.matrix.shape() + " vs " +
                              mot.matrix.shape());
        out.matrix = ops::concat_rows<S>({app.matrix, mot.matrix});
    } else if (ha) {
        out.matrix = app.matrix;
    } else if (hm) {
        out.matrix = mot.matrix;
    }
    return out;
}

struct ModalityMask {
    bool visual = true;
    bool audio = true;
    bool text = true;
};

// Row-stacked [F_V; F_A; F_T] with segment offsets retained for pooling
// and masking. Masked modalities contribute zero rows.
template <class S>
struct EncoderMemoryT {
    TensorT<S> matrix;
    int64_t v_rows = 0;
    int64_t a_rows = 0;
    int64_t t_rows = 0;

    int64_t rows() const { return v_rows + a_rows + t_rows; }
    int64_t d_h() const { return matrix.cols(); }
};

template <class S>
EncoderMemoryT<S> assemble_memory(const EncodedFeaturesT<S>& fv, const EncodedFeaturesT<S>& fa,
                                  const EncodedFeaturesT<S>& ft, const ModalityMask& mask) {
    EncoderMemoryT<S> mem;
    std::vector<TensorT<S>> parts;
    auto push = [&](const EncodedFeaturesT<S>& f, bool on, int64_t& count) {
        if (!on || !f.matrix.defined() || f.matrix.rows() == 0) {
            count = 0;
            return;
        }
        count = f.matrix.rows();
        parts.push_back(f.matrix);
    };
    push(fv, mask.visual, mem.v_rows);
    push(fa, mask.audio, mem.a_rows);
    push(ft, mask.text, mem.t_rows);
    if (parts.empty()) throw empty_memory_error();
    mem.matrix = ops::concat_rows(parts);
    return mem;
}

} // namespace spectrum
