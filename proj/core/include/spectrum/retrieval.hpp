#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "spectrum/feature_io.hpp"

namespace spectrum {

struct CaptionKey {
    std::string video_id;
    int caption_idx = 0;

    bool operator==(const CaptionKey& o) const {
        return video_id == o.video_id && caption_idx == o.caption_idx;
    }
    bool operator<(const CaptionKey& o) const {
        if (video_id != o.video_id) return video_id < o.video_id;
        return caption_idx < o.caption_idx;
    }
};

// Caption embeddings (C x d_r) plus pooled per-video embeddings, immutable
// after build; queries are safe to run concurrently.
class EmbeddingStore {
  public:
    // Embeddings taken from the manifest payload.
    static EmbeddingStore build(const Corpus& corpus);
    // Embeddings taken from SPFT sidecars: captions.spft holds one row per
    // caption in manifest order, videos.spft one row per item.
    static EmbeddingStore build_from_sidecar(const Corpus& corpus,
                                             const std::string& captions_spft,
                                             const std::string& videos_spft);

    int64_t caption_count() const { return static_cast<int64_t>(keys_.size()); }
    int64_t width() const { return d_r_; }
    const CaptionKey& key(int64_t i) const { return keys_[static_cast<size_t>(i)]; }
    const float* caption_embedding(int64_t i) const { return &matrix_[static_cast<size_t>(i) * d_r_]; }
    const std::vector<float>* video_embedding(const std::string& video_id) const;

  private:
    int64_t d_r_ = 0;
    std::vector<float> matrix_; // C x d_r
    std::vector<CaptionKey> keys_;
    std::unordered_map<std::string, std::vector<float>> video_embeddings_;
};

// Cosine similarity per stored caption; zero-norm vectors score 0.
std::vector<double> similarity_scores(const std::vector<float>& v, const EmbeddingStore& store);

struct RankedSelection {
    std::vector<int64_t> indices; // store indices, best first
    bool shortfall = false;       // fewer than n_t candidates remained
};

// Descending score, ties by ascending (video_id, caption_idx). Captions of
// the excluded video are skipped (training-time leak prevention).
RankedSelection rank_and_select(const std::vector<double>& scores, const EmbeddingStore& store,
                                int n_t, const std::optional<std::string>& exclude_video = {});

struct RetrievedText {
    std::vector<std::vector<std::string>> captions;
    bool shortfall = false;
};

RetrievedText retrieve_text(const std::string& video_id, const EmbeddingStore& store,
                            const Corpus& corpus, int n_t, bool exclude_self);

} // namespace spectrum
