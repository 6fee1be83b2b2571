#pragma once

#include <string>
#include <unordered_set>
#include <vector>

#include "spectrum/checkpoint.hpp"
#include "spectrum/config.hpp"
#include "spectrum/metrics.hpp"
#include "spectrum/model.hpp"
#include "spectrum/retrieval.hpp"

namespace spectrum {

struct EpochStats {
    int epoch = 0;
    double total = 0, l_cap = 0, l_m2s = 0, l_field = 0;
    double lr = 0;
    double wall_s = 0; // excluded from determinism guarantees
};

struct TrainLog {
    std::vector<EpochStats> epochs;
    void to_jsonl(const std::string& path) const;
};

// Resolves features, token ids, labels and retrieved captions for each
// item. `store` may be null (no textual modality); exclusion skips the
// query video's own captions.
std::vector<PreparedItem> prepare_items(const Corpus& corpus, const Corpus& store_corpus,
                                        const EmbeddingStore* store, const Vocabulary& vocab,
                                        const AttributeVocabulary& attrs,
                                        const EmotionLexicon& lexicon, const Config& cfg,
                                        bool exclude_self);

struct TrainOutput {
    CheckpointBundle bundle; // trained model plus vocabulary artifacts
    TrainLog log;
};

// Deterministic for (config, seed): fixed init, fixed shuffling, epoch
// learning rate lr * lr_decay^epoch. Writes a checkpoint and a JSONL train
// log when the paths are non-empty.
TrainOutput run_training(const Config& config, const Corpus& corpus,
                         const EmotionLexicon& lexicon, const FieldTaxonomy& taxonomy,
                         const std::unordered_set<std::string>& stopwords,
                         const std::string& checkpoint_dir = "",
                         const std::string& trainlog_path = "");

struct EvalOutput {
    metrics::MetricReport report;
    std::vector<std::vector<std::string>> candidates; // decoded token lists
};

// Beam-decodes every item and scores the full metric suite. Decoding may
// run in parallel; results are assembled in item order so the report is
// reproducible. Ablation flags come from `config` (checkpoint overrides
// applied by the caller).
EvalOutput run_eval(CheckpointBundle& bundle, const Config& config, const Corpus& test_corpus,
                    const Corpus* store_corpus, const EmbeddingStore* store);

} // namespace spectrum
