#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "spectrum/tensor.hpp"
#include "spectrum/text.hpp"

namespace spectrum {

template <class S>
struct AttentionParamsT {
    TensorT<S> wq, bq, wk, bk, wv, bv, wo, bo;

    static AttentionParamsT init(int64_t d_h, Pcg32& rng) {
        AttentionParamsT p;
        p.wq = TensorT<S>::glorot(d_h, d_h, rng);
        p.bq = TensorT<S>::zeros(1, d_h, true);
        p.wk = TensorT<S>::glorot(d_h, d_h, rng);
        p.bk = TensorT<S>::zeros(1, d_h, true);
        p.wv = TensorT<S>::glorot(d_h, d_h, rng);
        p.bv = TensorT<S>::zeros(1, d_h, true);
        p.wo = TensorT<S>::glorot(d_h, d_h, rng);
        p.bo = TensorT<S>::zeros(1, d_h, true);
        return p;
    }
};

// Pre-LN decoder block: self-attention, cross-attention over the encoder
// memory, position-wise feed-forward, each behind its own normalization.
template <class S>
struct DecoderBlockT {
    TensorT<S> ln1_g, ln1_b;
    AttentionParamsT<S> self_attn;
    TensorT<S> ln2_g, ln2_b;
    AttentionParamsT<S> cross_attn;
    TensorT<S> ln3_g, ln3_b;
    TensorT<S> ff_w1, ff_b1, ff_w2, ff_b2;

    static DecoderBlockT init(int64_t d_h, Pcg32& rng) {
        DecoderBlockT b;
        auto ln = [&](TensorT<S>& g, TensorT<S>& bb) {
            g = TensorT<S>::filled(1, d_h, S(1), true);
            bb = TensorT<S>::zeros(1, d_h, true);
        };
        ln(b.ln1_g, b.ln1_b);
        b.self_attn = AttentionParamsT<S>::init(d_h, rng);
        ln(b.ln2_g, b.ln2_b);
        b.cross_attn = AttentionParamsT<S>::init(d_h, rng);
        ln(b.ln3_g, b.ln3_b);
        b.ff_w1 = TensorT<S>::glorot(d_h, 4 * d_h, rng);
        b.ff_b1 = TensorT<S>::zeros(1, 4 * d_h, true);
        b.ff_w2 = TensorT<S>::glorot(4 * d_h, d_h, rng);
        b.ff_b2 = TensorT<S>::zeros(1, d_h, true);
        return b;
    }
};

template <class S>
struct DecoderParamsT {
    TensorT<S> word_emb; // |V| x d_h; also the (transposed) output projection
    TensorT<S> pos_emb;  // l_max x d_h, learned
    std::vector<DecoderBlockT<S>> blocks;
    TensorT<S> lnf_g, lnf_b;
    int64_t heads = 1;
    int64_t l_max = 30;

    static DecoderParamsT init(int64_t vocab, int64_t d_h, int64_t n_layers, int64_t heads,
                               int64_t l_max, Pcg32& rng) {
        if (d_h % heads != 0)
            throw shape_error("decoder: head count " + std::to_string(heads) +
                              " does not divide d_h " + std::to_string(d_h));
        DecoderParamsT p;
        p.word_emb = TensorT<S>::gaussian(vocab, d_h, 0.02, rng);
        p.pos_emb = TensorT<S>::gaussian(l_max, d_h, 0.02, rng);
        for (int64_t i = 0; i < n_layers; ++i) p.blocks.push_back(DecoderBlockT<S>::init(d_h, rng));
        p.lnf_g = TensorT<S>::filled(1, d_h, S(1), true);
        p.lnf_b = TensorT<S>::zeros(1, d_h, true);
        p.heads = heads;
        p.l_max = l_max;
        return p;
    }
};

// Optional record of cross-attention weights: one (q_rows x kv_rows)
// matrix per (layer, head), values copied out of the graph.
template <class S>
struct CrossAttentionTrace {
    std::vector<std::vector<S>> weights;
    std::vector<int64_t> q_rows;
    std::vector<int64_t> kv_rows;
};

// Scaled dot-product attention over split heads; mask (if given) is a
// q_rows x kv_rows byte matrix with 1 = blocked.
template <class S>
TensorT<S> attention(const TensorT<S>& q_in, const TensorT<S>& kv, const AttentionParamsT<S>& p,
                     int64_t heads, const std::vector<uint8_t>* mask = nullptr,
                     CrossAttentionTrace<S>* trace = nullptr) {
    const int64_t d_h = q_in.cols();
    if (d_h % heads != 0) throw shape_error("attention: heads must divide d_h");
    const int64_t d_k = d_h / heads;
    auto q = ops::add_rowvec(ops::matmul(q_in, p.wq), p.bq);
    auto k = ops::add_rowvec(ops::matmul(kv, p.wk), p.bk);
    auto v = ops::add_rowvec(ops::matmul(kv, p.wv), p.bv);
    std::vector<TensorT<S>> head_outs;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_k));
    for (int64_t h = 0; h < heads; ++h) {
        auto qh = ops::slice_cols(q, h * d_k, (h + 1) * d_k);
        auto kh = ops::slice_cols(k, h * d_k, (h + 1) * d_k);
        auto vh = ops::slice_cols(v, h * d_k, (h + 1) * d_k);
        auto scores = ops::scale(ops::matmul_nt(qh, kh), inv_sqrt_dk);
        auto weights = ops::softmax_rows(scores, mask);
        if (trace) {
            trace->weights.push_back(weights.data());
            trace->q_rows.push_back(weights.rows());
            trace->kv_rows.push_back(weights.cols());
        }
        head_outs.push_back(ops::matmul(weights, vh));
    }
    auto merged = heads == 1 ? head_outs[0] : ops::concat_cols(head_outs);
    return ops::add_rowvec(ops::matmul(merged, p.wo), p.bo);
}

inline std::vector<uint8_t> causal_mask(int64_t t) {
    std::vector<uint8_t> m(static_cast<size_t>(t * t), 0);
    for (int64_t r = 0; r < t; ++r)
        for (int64_t c = r + 1; c < t; ++c) m[static_cast<size_t>(r * t + c)] = 1;
    return m;
}

// Input embedding at position i: word + position + broadcast holistic
// vectors (either may be undefined under ablation).
template <class S>
TensorT<S> input_embed(const std::vector<int>& prefix, const DecoderParamsT<S>& p,
                       const TensorT<S>& l_fct, const TensorT<S>& l_em) {
    const int64_t t = static_cast<int64_t>(prefix.size());
    if (t > p.l_max)
        throw shape_error("input_embed: prefix length " + std::to_string(t) + " exceeds l_max " +
                          std::to_string(p.l_max));
    auto x = ops::add(ops::gather_rows(p.word_emb, prefix), ops::slice_rows(p.pos_emb, 0, t));
    if (l_fct.defined()) x = ops::add_rowvec(x, l_fct);
    if (l_em.defined()) x = ops::add_rowvec(x, l_em);
    return x;
}

// Full pre-LN stack. kv holds the encoder memory with any attribute
// embedding rows already appended; logits come from the tied embedding.
template <class S>
TensorT<S> decoder_hidden(const std::vector<int>& prefix, const TensorT<S>& kv,
                          const DecoderParamsT<S>& p, const TensorT<S>& l_fct,
                          const TensorT<S>& l_em, CrossAttentionTrace<S>* trace = nullptr) {
    const int64_t t = static_cast<int64_t>(prefix.size());
    auto h = input_embed(prefix, p, l_fct, l_em);
    auto mask = causal_mask(t);
    for (const auto& block : p.blocks) {
        auto n1 = ops::layer_norm(h, block.ln1_g, block.ln1_b);
        h = ops::add(h, attention(n1, n1, block.self_attn, p.heads, &mask));
        auto n2 = ops::layer_norm(h, block.ln2_g, block.ln2_b);
        h = ops::add(h, attention(n2, kv, block.cross_attn, p.heads, nullptr, trace));
        auto n3 = ops::layer_norm(h, block.ln3_g, block.ln3_b);
        auto ff = ops::add_rowvec(
            ops::matmul(ops::gelu(ops::add_rowvec(ops::matmul(n3, block.ff_w1), block.ff_b1)),
                        block.ff_w2),
            block.ff_b2);
        h = ops::add(h, ff);
    }
    return ops::layer_norm(h, p.lnf_g, p.lnf_b);
}

template <class S>
TensorT<S> decoder_logits(const std::vector<int>& prefix, const TensorT<S>& kv,
                          const DecoderParamsT<S>& p, const TensorT<S>& l_fct,
                          const TensorT<S>& l_em, CrossAttentionTrace<S>* trace = nullptr) {
    auto h = decoder_hidden(prefix, kv, p, l_fct, l_em, trace);
    return ops::matmul_nt(h, p.word_emb); // weight-tied output projection
}

// Teacher-forced caption loss: sum over positions of next-token
// cross-entropy. content excludes bos/eos framing.
template <class S>
TensorT<S> caption_loss(const std::vector<int>& content, const TensorT<S>& kv,
                        const DecoderParamsT<S>& p, const TensorT<S>& l_fct,
                        const TensorT<S>& l_em) {
    if (content.empty()) throw shape_error("caption_loss: empty caption");
    std::vector<int> input;
    input.push_back(Vocabulary::kBos);
    input.insert(input.end(), content.begin(), content.end());
    std::vector<int> targets = content;
    targets.push_back(Vocabulary::kEos);
    auto logits = decoder_logits(input, kv, p, l_fct, l_em);
    TensorT<S> loss;
    for (size_t i = 0; i < targets.size(); ++i) {
        auto term = ops::cross_entropy_logits(
            ops::slice_rows(logits, static_cast<int64_t>(i), static_cast<int64_t>(i) + 1),
            targets[i]);
        loss = loss.defined() ? ops::add(loss, term) : term;
    }
    return loss;
}

// ---- decoding ----

// Next-token scorer: prefix (starting with bos) -> logits over the
// vocabulary. Decoding is generic over this interface so toy scorers can
// drive the same search code.
template <class S>
using StepScorer = std::function<std::vector<S>(const std::vector<int>&)>;

struct Hypothesis {
    std::vector<int> tokens; // starts with bos
    double log_prob = 0.0;
    bool finished = false;
};

inline bool hyp_better(const Hypothesis& a, const Hypothesis& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.tokens < b.tokens; // deterministic tie rule
}

template <class S>
std::vector<double> log_softmax_vec(const std::vector<S>& logits) {
    double mx = -std::numeric_limits<double>::infinity();
    for (S v : logits) mx = std::max(mx, static_cast<double>(v));
    double sum = 0;
    for (S v : logits) sum += std::exp(static_cast<double>(v) - mx);
    const double lse = std::log(sum) + mx;
    std::vector<double> out(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) out[i] = static_cast<double>(logits[i]) - lse;
    return out;
}

// Greedy argmax decoding; ties pick the smallest token index.
template <class S>
Hypothesis greedy_decode(const StepScorer<S>& step, int64_t l_max, int bos = Vocabulary::kBos,
                         int eos = Vocabulary::kEos) {
    Hypothesis h;
    h.tokens = {bos};
    while (static_cast<int64_t>(h.tokens.size()) < l_max) {
        auto lp = log_softmax_vec(step(h.tokens));
        size_t best = 0;
        for (size_t i = 1; i < lp.size(); ++i)
            if (lp[i] > lp[best]) best = i;
        h.log_prob += lp[best];
        h.tokens.push_back(static_cast<int>(best));
        if (static_cast<int>(best) == eos) {
            h.finished = true;
            return h;
        }
    }
    h.finished = true; // length cap
    return h;
}

// Beam search over accumulated log-probabilities, no length normalization.
// Finished hypotheses retire into a pool; the best finished one wins, with
// the best live hypothesis as fallback at the length cap.
template <class S>
Hypothesis beam_search(const StepScorer<S>& step, int beam, int64_t l_max,
                       int bos = Vocabulary::kBos, int eos = Vocabulary::kEos) {
    if (beam < 1) throw std::runtime_error("beam_search: beam must be >= 1");
    std::vector<Hypothesis> live{{{bos}, 0.0, false}};
    std::vector<Hypothesis> pool;
    while (!live.empty()) {
        std::vector<Hypothesis> candidates;
        for (const auto& hyp : live) {
            if (static_cast<int64_t>(hyp.tokens.size()) >= l_max) {
                Hypothesis done = hyp;
                done.finished = true;
                pool.push_back(done);
                continue;
            }
            auto lp = log_softmax_vec(step(hyp.tokens));
            // top-`beam` tokens of this hypothesis, ties to smaller index
            std::vector<int> order(lp.size());
            std::iota(order.begin(), order.end(), 0);
            const size_t keep = std::min<size_t>(static_cast<size_t>(beam), lp.size());
            std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                              [&](int a, int b) {
                                  if (lp[static_cast<size_t>(a)] != lp[static_cast<size_t>(b)])
                                      return lp[static_cast<size_t>(a)] > lp[static_cast<size_t>(b)];
                                  return a < b;
                              });
            for (size_t j = 0; j < keep; ++j) {
                Hypothesis next = hyp;
                next.tokens.push_back(order[j]);
                next.log_prob += lp[static_cast<size_t>(order[j])];
                candidates.push_back(std::move(next));
            }
        }
        if (candidates.empty()) break;
        std::sort(candidates.begin(), candidates.end(), hyp_better);
        if (static_cast<int>(candidates.size()) > beam) candidates.resize(static_cast<size_t>(beam));
        live.clear();
        for (auto& c : candidates) {
            if (c.tokens.back() == eos || static_cast<int64_t>(c.tokens.size()) >= l_max) {
                c.finished = true;
                pool.push_back(std::move(c));
            } else {
                live.push_back(std::move(c));
            }
        }
    }
    if (pool.empty()) throw std::runtime_error("beam_search: no hypothesis produced");
    return *std::min_element(pool.begin(), pool.end(),
                             [](const Hypothesis& a, const Hypothesis& b) { return hyp_better(a, b); });
}

} // namespace spectrum
