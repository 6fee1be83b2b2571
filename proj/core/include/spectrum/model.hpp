#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spectrum/adam.hpp"
#include "spectrum/concepts.hpp"
#include "spectrum/decoder.hpp"
#include "spectrum/encoders.hpp"
#include "spectrum/feature_io.hpp"
#include "spectrum/lexicon.hpp"
#include "spectrum/retrieval.hpp"

namespace spectrum {

struct ModelDims {
    int64_t d_h = 64;
    int64_t d_b = 32;
    int64_t d_e = 32;
    int64_t heads = 4;
    int64_t n_layers = 2;
    int64_t l_max = 30;
    int64_t vocab = 0;
    int64_t n_att = 0;
    int64_t n_ctg = 34;
    int64_t n_fld = 20;
    int64_t k_top = 10;
};

enum class RhoMode { ground_truth, predicted };

struct AblationFlags {
    ModalityMask mask;
    bool vtai = true;
    bool cfb = true;
    bool aeb = true;
    bool field_emb = true;
    bool emotion_emb = true;
    RhoMode rho_mode = RhoMode::ground_truth;
    double lambda_field = 0.1; // aux field loss weight in predicted mode
};

// Everything the model needs for one video, resolved ahead of time so the
// training loop stays deterministic and allocation-light.
struct PreparedItem {
    std::string video_id;
    FeatureSequence appearance;
    FeatureSequence motion;
    FeatureSequence audio;
    std::vector<std::vector<int>> caption_ids; // content tokens, no bos/eos
    std::vector<std::vector<int>> retrieved_ids;
    std::vector<float> attr_labels;
    std::vector<double> rho_em_gt;
    int field_label = 0;
};

template <class S>
struct ConceptStateT {
    TensorT<S> x;            // pooled 1 x 3d_h
    TensorT<S> pr;           // attribute probabilities (undefined when VTAI off)
    TensorT<S> rho_fct;      // simplex over fields
    TensorT<S> rho_em;       // simplex over categories
    TensorT<S> l_fct;        // holistic field vector (undefined under ablation)
    TensorT<S> l_em;         // holistic emotion vector
    TensorT<S> a_emb;        // k_top x d_h (undefined when AEB off)
    TensorT<S> field_logits; // raw field head output in predicted mode
    std::vector<int> top_attrs;
};

template <class S>
struct LossPartsT {
    TensorT<S> total;
    TensorT<S> caption;
    TensorT<S> m2s;   // undefined when VTAI off
    TensorT<S> field; // undefined outside predicted mode
};

template <class S>
class SpectrumModelT {
  public:
    SpectrumModelT() = default;

    SpectrumModelT(const ModelDims& dims, uint64_t seed) : dims_(dims) {
        // fixed draw order keeps initialization a pure function of
        // (dims, seed)
        Pcg32 rng(seed, 7);
        app_enc_ = EncoderParamsT<S>::init(dims.d_b, dims.d_h, rng);
        mot_enc_ = EncoderParamsT<S>::init(dims.d_b, dims.d_h, rng);
        aud_enc_ = EncoderParamsT<S>::init(dims.d_b, dims.d_h, rng);
        txt_enc_ = EncoderParamsT<S>::init(dims.d_b, dims.d_h, rng);
        text_emb_ = TensorT<S>::gaussian(dims.vocab, dims.d_b, 0.02, rng);
        vtai_ = VtaiParamsT<S>::init(dims.d_h, dims.n_att, rng);
        cfb_ = CfbParamsT<S>::init(dims.n_fld, dims.n_ctg, dims.d_e, dims.d_h, rng);
        field_head_ = FieldHeadT<S>::init(dims.d_h, dims.n_fld, rng);
        aeb_table_ = TensorT<S>::gaussian(dims.n_att, dims.d_h, 0.02, rng);
        dec_ = DecoderParamsT<S>::init(dims.vocab, dims.d_h, dims.n_layers, dims.heads, dims.l_max,
                                       rng);
    }

    const ModelDims& dims() const { return dims_; }
    DecoderParamsT<S>& decoder() { return dec_; }
    const DecoderParamsT<S>& decoder() const { return dec_; }
    CfbParamsT<S>& cfb() { return cfb_; }
    VtaiParamsT<S>& vtai() { return vtai_; }

    EncoderMemoryT<S> build_memory(const PreparedItem& item, const AblationFlags& flags) const {
        EncodedFeaturesT<S> fv, fa, ft;
        if (flags.mask.visual)
            fv = fuse_video(encode_modality(item.appearance, app_enc_),
                            encode_modality(item.motion, mot_enc_));
        if (flags.mask.audio) fa = encode_modality(item.audio, aud_enc_);
        if (flags.mask.text && !item.retrieved_ids.empty())
            ft = encode_text(item.retrieved_ids, text_emb_, txt_enc_);
        return assemble_memory(fv, fa, ft, flags.mask);
    }

    // Teacher-forced rho comes from the item annotations; predicted rho is
    // derived from the attribute head (always used at inference).
    ConceptStateT<S> investigate(const EncoderMemoryT<S>& mem, const PreparedItem& item,
                                 const AblationFlags& flags, const AttributeVocabulary& attrs,
                                 bool predicted_rho) const {
        ConceptStateT<S> st;
        st.x = pool_memory(mem);
        if (flags.vtai) st.pr = vtai_forward(st.x, vtai_);
        if (flags.cfb) {
            if (predicted_rho) {
                if (!st.pr.defined())
                    throw std::runtime_error("predicted rho mode requires the VTAI head");
                st.field_logits = ops::add_rowvec(ops::matmul(st.x, field_head_.w), field_head_.b);
                st.rho_fct = ops::softmax_rows(st.field_logits);
                st.rho_em = predict_rho_em(st.pr, attrs);
            } else {
                std::vector<S> fct(static_cast<size_t>(dims_.n_fld), S(0));
                fct[static_cast<size_t>(item.field_label)] = S(1);
                st.rho_fct = TensorT<S>::from_data(1, dims_.n_fld, std::move(fct));
                std::vector<S> em(item.rho_em_gt.begin(), item.rho_em_gt.end());
                st.rho_em = TensorT<S>::from_data(1, dims_.n_ctg, std::move(em));
            }
            if (flags.field_emb)
                st.l_fct = ops::matmul(ops::matmul(st.rho_fct, cfb_.w_fld), cfb_.w_fct);
            if (flags.emotion_emb)
                st.l_em = ops::matmul(ops::matmul(st.rho_em, cfb_.w_ctg), cfb_.w_em);
        }
        if (flags.aeb && flags.vtai && dims_.k_top > 0) {
            st.top_attrs = top_k_attributes(st.pr, static_cast<int>(dims_.k_top));
            st.a_emb = attribute_embed(st.pr, aeb_table_, static_cast<int>(dims_.k_top));
        }
        return st;
    }

    TensorT<S> cross_kv(const EncoderMemoryT<S>& mem, const ConceptStateT<S>& st) const {
        if (st.a_emb.defined()) return ops::concat_rows<S>({mem.matrix, st.a_emb});
        return mem.matrix;
    }

    LossPartsT<S> losses(const PreparedItem& item, size_t caption_idx,
                         const AblationFlags& flags, const AttributeVocabulary& attrs) const {
        auto mem = build_memory(item, flags);
        auto st = investigate(mem, item, flags, attrs, flags.rho_mode == RhoMode::predicted);
        auto kv = cross_kv(mem, st);
        LossPartsT<S> parts;
        parts.caption = caption_loss(item.caption_ids.at(caption_idx), kv, dec_, st.l_fct, st.l_em);
        parts.total = parts.caption;
        if (flags.vtai) {
            std::vector<S> labels(item.attr_labels.begin(), item.attr_labels.end());
            parts.m2s = m2s_loss(st.pr, labels);
            parts.total = ops::add(parts.total, parts.m2s);
        }
        if (flags.cfb && flags.rho_mode == RhoMode::predicted && st.field_logits.defined()) {
            parts.field = ops::cross_entropy_logits(st.field_logits, item.field_label);
            parts.total = ops::add(parts.total, ops::scale(parts.field, flags.lambda_field));
        }
        return parts;
    }

    // Scorer over the fixed per-item state; call under NoGradGuard.
    StepScorer<S> make_scorer(const TensorT<S>& kv, const TensorT<S>& l_fct,
                              const TensorT<S>& l_em) const {
        const DecoderParamsT<S>* dec = &dec_;
        return [dec, kv, l_fct, l_em](const std::vector<int>& prefix) {
            auto logits = decoder_logits(prefix, kv, *dec, l_fct, l_em);
            const int64_t last = logits.rows() - 1;
            std::vector<S> out(logits.data().begin() + last * logits.cols(),
                               logits.data().begin() + (last + 1) * logits.cols());
            return out;
        };
    }

    Hypothesis decode(const PreparedItem& item, const AblationFlags& flags,
                      const AttributeVocabulary& attrs, int beam) const {
        NoGradGuard ng;
        auto mem = build_memory(item, flags);
        auto st = investigate(mem, item, flags, attrs, flags.vtai);
        auto kv = cross_kv(mem, st);
        auto scorer = make_scorer(kv, st.l_fct, st.l_em);
        if (beam == 1) return greedy_decode(scorer, dims_.l_max);
        return beam_search(scorer, beam, dims_.l_max);
    }

    struct AttentionMass {
        std::vector<int> attr_indices;  // selected attributes, rank order
        std::vector<double> mass;       // per-attribute cross-attention mass
        double segment_total = 0.0;     // total mass on the A_emb segment
    };

    // Teacher-forces `tokens` (with bos framing) and accumulates, over all
    // layers, heads and decode positions, the cross-attention weight that
    // landed on each attribute embedding row.
    AttentionMass attribute_attention(const PreparedItem& item, const AblationFlags& flags,
                                      const AttributeVocabulary& attrs,
                                      const std::vector<int>& content_tokens) const {
        NoGradGuard ng;
        auto mem = build_memory(item, flags);
        auto st = investigate(mem, item, flags, attrs, flags.vtai);
        AttentionMass out;
        out.attr_indices = st.top_attrs;
        out.mass.assign(st.top_attrs.size(), 0.0);
        auto kv = cross_kv(mem, st);
        std::vector<int> input{Vocabulary::kBos};
        input.insert(input.end(), content_tokens.begin(), content_tokens.end());
        CrossAttentionTrace<S> trace;
        decoder_hidden(input, kv, dec_, st.l_fct, st.l_em, &trace);
        const int64_t mem_rows = mem.rows();
        for (size_t t = 0; t < trace.weights.size(); ++t) {
            const int64_t q_rows = trace.q_rows[t];
            const int64_t kv_rows = trace.kv_rows[t];
            for (int64_t r = 0; r < q_rows; ++r)
                for (int64_t c = mem_rows; c < kv_rows; ++c) {
                    const double w = static_cast<double>(trace.weights[t][r * kv_rows + c]);
                    out.mass[static_cast<size_t>(c - mem_rows)] += w;
                    out.segment_total += w;
                }
        }
        return out;
    }

    // Every tensor, for checkpointing; order is fixed.
    std::vector<NamedParamT<S>> all_params() {
        std::vector<NamedParamT<S>> out;
        auto enc = [&](const char* tag, EncoderParamsT<S>& e) {
            std::string base = std::string("enc.") + tag + ".";
            out.push_back({base + "w", e.w});
            out.push_back({base + "b", e.b});
            out.push_back({base + "ln_g", e.ln_gain});
            out.push_back({base + "ln_b", e.ln_bias});
        };
        enc("app", app_enc_);
        enc("mot", mot_enc_);
        enc("aud", aud_enc_);
        enc("txt", txt_enc_);
        out.push_back({"text_emb", text_emb_});
        out.push_back({"vtai.w", vtai_.w});
        out.push_back({"vtai.b", vtai_.b});
        out.push_back({"cfb.w_fld", cfb_.w_fld});
        out.push_back({"cfb.w_ctg", cfb_.w_ctg});
        out.push_back({"cfb.w_fct", cfb_.w_fct});
        out.push_back({"cfb.w_em", cfb_.w_em});
        out.push_back({"field_head.w", field_head_.w});
        out.push_back({"field_head.b", field_head_.b});
        out.push_back({"aeb.table", aeb_table_});
        out.push_back({"dec.word_emb", dec_.word_emb});
        out.push_back({"dec.pos_emb", dec_.pos_emb});
        for (size_t i = 0; i < dec_.blocks.size(); ++i) {
            auto& blk = dec_.blocks[i];
            std::string base = "dec.block" + std::to_string(i) + ".";
            auto att = [&](const char* tag, AttentionParamsT<S>& a) {
                std::string ab = base + tag + ".";
                out.push_back({ab + "wq", a.wq});
                out.push_back({ab + "bq", a.bq});
                out.push_back({ab + "wk", a.wk});
                out.push_back({ab + "bk", a.bk});
                out.push_back({ab + "wv", a.wv});
                out.push_back({ab + "bv", a.bv});
                out.push_back({ab + "wo", a.wo});
                out.push_back({ab + "bo", a.bo});
            };
            out.push_back({base + "ln1_g", blk.ln1_g});
            out.push_back({base + "ln1_b", blk.ln1_b});
            att("self", blk.self_attn);
            out.push_back({base + "ln2_g", blk.ln2_g});
            out.push_back({base + "ln2_b", blk.ln2_b});
            att("cross", blk.cross_attn);
            out.push_back({base + "ln3_g", blk.ln3_g});
            out.push_back({base + "ln3_b", blk.ln3_b});
            out.push_back({base + "ff_w1", blk.ff_w1});
            out.push_back({base + "ff_b1", blk.ff_b1});
            out.push_back({base + "ff_w2", blk.ff_w2});
            out.push_back({base + "ff_b2", blk.ff_b2});
        }
        out.push_back({"dec.lnf_g", dec_.lnf_g});
        out.push_back({"dec.lnf_b", dec_.lnf_b});
        return out;
    }

    // Trainable subset under the given flags; untouched modules stay out so
    // the optimizer sees exactly the parameters that can receive gradients.
    std::vector<NamedParamT<S>> active_params(const AblationFlags& flags, bool any_text) {
        std::vector<NamedParamT<S>> out;
        for (auto& p : all_params()) {
            const std::string& n = p.name;
            auto starts = [&](const char* pre) { return n.rfind(pre, 0) == 0; };
            bool keep = true;
            if (starts("enc.app.") || starts("enc.mot.")) keep = flags.mask.visual;
            else if (starts("enc.aud.")) keep = flags.mask.audio;
            else if (starts("enc.txt.") || n == "text_emb") keep = flags.mask.text && any_text;
            else if (starts("vtai.")) keep = flags.vtai;
            else if (n == "cfb.w_fld" || n == "cfb.w_fct")
                keep = flags.cfb && flags.field_emb;
            else if (n == "cfb.w_ctg" || n == "cfb.w_em")
                keep = flags.cfb && flags.emotion_emb;
            else if (starts("field_head."))
                keep = flags.cfb && flags.rho_mode == RhoMode::predicted;
            else if (n == "aeb.table") keep = flags.aeb && flags.vtai && dims_.k_top > 0;
            if (keep) out.push_back(p);
        }
        return out;
    }

  private:
    ModelDims dims_;
    EncoderParamsT<S> app_enc_, mot_enc_, aud_enc_, txt_enc_;
    TensorT<S> text_emb_; // |V| x d_b
    VtaiParamsT<S> vtai_;
    CfbParamsT<S> cfb_;
    FieldHeadT<S> field_head_;
    TensorT<S> aeb_table_; // n_att x d_h
    DecoderParamsT<S> dec_;
};

using SpectrumModel = SpectrumModelT<float>;

} // namespace spectrum
