#include "spectrum/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spectrum {

EmbeddingStore EmbeddingStore::build(const Corpus& corpus) {
    EmbeddingStore store;
    for (const auto& item : corpus.items) {
        if (!item.video_embedding.empty()) {
            if (store.d_r_ == 0) store.d_r_ = static_cast<int64_t>(item.video_embedding.size());
            store.video_embeddings_[item.video_id] = item.video_embedding;
        }
        for (size_t c = 0; c < item.caption_embeddings.size(); ++c) {
            const auto& e = item.caption_embeddings[c];
            if (store.d_r_ == 0) store.d_r_ = static_cast<int64_t>(e.size());
            if (static_cast<int64_t>(e.size()) != store.d_r_)
                throw std::runtime_error("embedding store: width mismatch for " + item.video_id);
            store.matrix_.insert(store.matrix_.end(), e.begin(), e.end());
            store.keys_.push_back({item.video_id, static_cast<int>(c)});
        }
    }
    if (store.keys_.empty()) throw std::runtime_error("embedding store: no caption embeddings");
    return store;
}

EmbeddingStore EmbeddingStore::build_from_sidecar(const Corpus& corpus,
                                                  const std::string& captions_spft,
                                                  const std::string& videos_spft) {
    Modality code;
    std::vector<uint32_t> dims;
    std::vector<float> cap_payload, vid_payload;
    load_spft(captions_spft, code, dims, cap_payload);
    if (dims.size() != 2) throw dimension_error("caption sidecar: expected rank 2");
    const int64_t d_r = dims[1];
    std::vector<uint32_t> vdims;
    load_spft(videos_spft, code, vdims, vid_payload);
    if (vdims.size() != 2 || static_cast<int64_t>(vdims[1]) != d_r)
        throw dimension_error("video sidecar: expected rank 2 with matching width");
    if (vdims[0] != corpus.items.size())
        throw dimension_error("video sidecar: row count does not match manifest");

    EmbeddingStore store;
    store.d_r_ = d_r;
    size_t row = 0;
    for (size_t i = 0; i < corpus.items.size(); ++i) {
        const auto& item = corpus.items[i];
        store.video_embeddings_[item.video_id] =
            std::vector<float>(vid_payload.begin() + static_cast<int64_t>(i) * d_r,
                               vid_payload.begin() + static_cast<int64_t>(i + 1) * d_r);
        for (size_t c = 0; c < item.captions.size(); ++c) {
            if ((row + 1) * static_cast<size_t>(d_r) > cap_payload.size())
                throw dimension_error("caption sidecar: fewer rows than manifest captions");
            store.matrix_.insert(store.matrix_.end(),
                                 cap_payload.begin() + static_cast<int64_t>(row) * d_r,
                                 cap_payload.begin() + static_cast<int64_t>(row + 1) * d_r);
            store.keys_.push_back({item.video_id, static_cast<int>(c)});
            ++row;
        }
    }
    if (row * static_cast<size_t>(d_r) != cap_payload.size())
        throw dimension_error("caption sidecar: more rows than manifest captions");
    return store;
}

const std::vector<float>* EmbeddingStore::video_embedding(const std::string& video_id) const {
    auto it = video_embeddings_.find(video_id);
    return it == video_embeddings_.end() ? nullptr : &it->second;
}

std::vector<double> similarity_scores(const std::vector<float>& v, const EmbeddingStore& store) {
    if (static_cast<int64_t>(v.size()) != store.width())
        throw std::runtime_error("similarity: query width " + std::to_string(v.size()) +
                                 " does not match store width " + std::to_string(store.width()));
    double vnorm = 0;
    for (float x : v) vnorm += static_cast<double>(x) * x;
    vnorm = std::sqrt(vnorm);
    std::vector<double> scores(static_cast<size_t>(store.caption_count()), 0.0);
    if (vnorm == 0.0) return scores; // zero-norm convention
    for (int64_t i = 0; i < store.caption_count(); ++i) {
        const float* e = store.caption_embedding(i);
        double dot = 0, enorm = 0;
        for (int64_t c = 0; c < store.width(); ++c) {
            dot += static_cast<double>(v[static_cast<size_t>(c)]) * e[c];
            enorm += static_cast<double>(e[c]) * e[c];
        }
        enorm = std::sqrt(enorm);
        scores[static_cast<size_t>(i)] = enorm == 0.0 ? 0.0 : dot / (vnorm * enorm);
    }
    return scores;
}

RankedSelection rank_and_select(const std::vector<double>& scores, const EmbeddingStore& store,
                                int n_t, const std::optional<std::string>& exclude_video) {
    if (n_t < 1) throw std::runtime_error("rank_and_select: n_t must be >= 1");
    if (scores.size() != static_cast<size_t>(store.caption_count()))
        throw std::runtime_error("rank_and_select: score vector length mismatch");
    std::vector<int64_t> candidates;
    for (int64_t i = 0; i < store.caption_count(); ++i) {
        if (exclude_video && store.key(i).video_id == *exclude_video) continue;
        candidates.push_back(i);
    }
    if (candidates.empty() && !exclude_video)
        throw std::runtime_error("rank_and_select: empty candidate set");
    std::sort(candidates.begin(), candidates.end(), [&](int64_t a, int64_t b) {
        const double sa = scores[static_cast<size_t>(a)];
        const double sb = scores[static_cast<size_t>(b)];
        if (sa != sb) return sa > sb;
        return store.key(a) < store.key(b);
    });
    RankedSelection sel;
    if (static_cast<int>(candidates.size()) < n_t) {
        sel.shortfall = true;
        sel.indices = std::move(candidates);
    } else {
        sel.indices.assign(candidates.begin(), candidates.begin() + n_t);
    }
    return sel;
}

RetrievedText retrieve_text(const std::string& video_id, const EmbeddingStore& store,
                            const Corpus& corpus, int n_t, bool exclude_self) {
    const auto* v = store.video_embedding(video_id);
    if (!v) throw std::runtime_error("retrieve_text: unknown video '" + video_id + "'");
    auto scores = similarity_scores(*v, store);
    auto sel = rank_and_select(scores, store, n_t,
                               exclude_self ? std::optional<std::string>(video_id) : std::nullopt);
    RetrievedText out;
    out.shortfall = sel.shortfall;
    // manifest order lookup: video_id -> item index
    std::unordered_map<std::string, size_t> by_id;
    for (size_t i = 0; i < corpus.items.size(); ++i) by_id[corpus.items[i].video_id] = i;
    for (int64_t idx : sel.indices) {
        const auto& key = store.key(idx);
        auto it = by_id.find(key.video_id);
        if (it == by_id.end())
            throw std::runtime_error("retrieve_text: store references unknown video '" +
                                     key.video_id + "'");
        out.captions.push_back(
            corpus.items[it->second].captions.at(static_cast<size_t>(key.caption_idx)));
    }
    return out;
}

} // namespace spectrum
