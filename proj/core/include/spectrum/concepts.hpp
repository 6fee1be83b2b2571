#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "spectrum/encoders.hpp"
#include "spectrum/lexicon.hpp"
#include "spectrum/tensor.hpp"

namespace spectrum {

// Attribute probability head over the pooled multimodal vector.
template <class S>
struct VtaiParamsT {
    TensorT<S> w; // 3*d_h x n_att
    TensorT<S> b; // 1 x n_att

    static VtaiParamsT init(int64_t d_h, int64_t n_att, Pcg32& rng) {
        VtaiParamsT p;
        p.w = TensorT<S>::glorot(3 * d_h, n_att, rng);
        p.b = TensorT<S>::zeros(1, n_att, true);
        return p;
    }
};

// Coarse-to-fine matrices mapping field/category distributions to latent
// holistic vectors.
template <class S>
struct CfbParamsT {
    TensorT<S> w_fld; // n_fld x d_e
    TensorT<S> w_ctg; // n_ctg x d_e
    TensorT<S> w_fct; // d_e x d_h
    TensorT<S> w_em;  // d_e x d_h

    static CfbParamsT init(int64_t n_fld, int64_t n_ctg, int64_t d_e, int64_t d_h, Pcg32& rng) {
        CfbParamsT p;
        p.w_fld = TensorT<S>::glorot(n_fld, d_e, rng);
        p.w_ctg = TensorT<S>::glorot(n_ctg, d_e, rng);
        p.w_fct = TensorT<S>::glorot(d_e, d_h, rng);
        p.w_em = TensorT<S>::glorot(d_e, d_h, rng);
        return p;
    }
};

// Auxiliary linear head predicting the content field from the pooled
// vector; only trained when predicted-rho mode is active.
template <class S>
struct FieldHeadT {
    TensorT<S> w; // 3*d_h x n_fld
    TensorT<S> b; // 1 x n_fld

    static FieldHeadT init(int64_t d_h, int64_t n_fld, Pcg32& rng) {
        FieldHeadT p;
        p.w = TensorT<S>::glorot(3 * d_h, n_fld, rng);
        p.b = TensorT<S>::zeros(1, n_fld, true);
        return p;
    }
};

// Mean over each modality segment, concatenated in V, A, T order; a masked
// or empty segment contributes zeros.
template <class S>
TensorT<S> pool_memory(const EncoderMemoryT<S>& mem) {
    const int64_t d = mem.d_h();
    auto segment = [&](int64_t r0, int64_t r1) -> TensorT<S> {
        if (r1 == r0) return TensorT<S>::zeros(1, d);
        return ops::mean_over_rows(ops::slice_rows(mem.matrix, r0, r1));
    };
    const int64_t v_end = mem.v_rows;
    const int64_t a_end = v_end + mem.a_rows;
    const int64_t t_end = a_end + mem.t_rows;
    return ops::concat_cols<S>({segment(0, v_end), segment(v_end, a_end), segment(a_end, t_end)});
}

template <class S>
TensorT<S> vtai_forward(const TensorT<S>& x, const VtaiParamsT<S>& p) {
    return ops::sigmoid(ops::add_rowvec(ops::matmul(x, p.w), p.b));
}

// Mean binary cross-entropy against the {0,1} attribute labels.
template <class S>
TensorT<S> m2s_loss(const TensorT<S>& pr, const std::vector<S>& labels) {
    return ops::bce_mean(pr, labels);
}

// Category score = max attribute probability inside the category's bag;
// categories with no attribute fall to a large negative score.
template <class S>
TensorT<S> predict_rho_em(const TensorT<S>& pr, const AttributeVocabulary& attrs) {
    return ops::softmax_rows(ops::group_max(pr, attrs.category_groups(), S(-1e9)));
}

template <class S>
TensorT<S> predict_rho_fct(const TensorT<S>& x, const FieldHeadT<S>& head) {
    return ops::softmax_rows(ops::add_rowvec(ops::matmul(x, head.w), head.b));
}

// Eq. of the coarse-to-fine chain: rho * W_coarse * W_fine, linear in rho.
template <class S>
std::pair<TensorT<S>, TensorT<S>> holistic_vectors(const TensorT<S>& rho_fct,
                                                   const TensorT<S>& rho_em,
                                                   const CfbParamsT<S>& p) {
    if (rho_fct.cols() != p.w_fld.rows())
        throw shape_error("holistic: rho_fct width " + rho_fct.shape() + " vs W_fld " +
                          p.w_fld.shape());
    if (rho_em.cols() != p.w_ctg.rows())
        throw shape_error("holistic: rho_em width " + rho_em.shape() + " vs W_ctg " +
                          p.w_ctg.shape());
    auto l_fct = ops::matmul(ops::matmul(rho_fct, p.w_fld), p.w_fct);
    auto l_em = ops::matmul(ops::matmul(rho_em, p.w_ctg), p.w_em);
    return {l_fct, l_em};
}

// Top-k attribute indices by descending probability, ties by ascending
// attribute index.
template <class S>
std::vector<int> top_k_attributes(const TensorT<S>& pr, int k_top) {
    std::vector<int> idx(static_cast<size_t>(pr.cols()));
    std::iota(idx.begin(), idx.end(), 0);
    const auto& v = pr.data();
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (v[static_cast<size_t>(a)] != v[static_cast<size_t>(b)])
            return v[static_cast<size_t>(a)] > v[static_cast<size_t>(b)];
        return a < b;
    });
    idx.resize(static_cast<size_t>(std::min<int64_t>(k_top, pr.cols())));
    return idx;
}

// A_emb row j = pr[attr_j] * table[attr_j], rows ordered by rank.
// k_top = 0 yields an undefined (0-row) matrix for the AEB-off ablation.
template <class S>
TensorT<S> attribute_embed(const TensorT<S>& pr, const TensorT<S>& table, int k_top) {
    if (pr.cols() != table.rows())
        throw shape_error("attribute_embed: pr " + pr.shape() + " vs table " + table.shape());
    if (k_top == 0) return TensorT<S>();
    auto idx = top_k_attributes(pr, k_top);
    return ops::scale_rows(ops::gather_rows(table, idx), ops::gather_elems(pr, idx));
}

} // namespace spectrum
