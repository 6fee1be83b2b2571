#include "spectrum/train.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <thread>

#include <json.hpp>

namespace spectrum {

void TrainLog::to_jsonl(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("trainlog: cannot open " + path);
    for (const auto& e : epochs) {
        nlohmann::ordered_json j;
        j["epoch"] = e.epoch;
        j["total"] = e.total;
        j["l_cap"] = e.l_cap;
        j["l_m2s"] = e.l_m2s;
        j["l_field"] = e.l_field;
        j["lr"] = e.lr;
        j["wall_s"] = e.wall_s;
        os << j.dump() << "\n";
    }
}

std::vector<PreparedItem> prepare_items(const Corpus& corpus, const Corpus& store_corpus,
                                        const EmbeddingStore* store, const Vocabulary& vocab,
                                        const AttributeVocabulary& attrs,
                                        const EmotionLexicon& lexicon, const Config& cfg,
                                        bool exclude_self) {
    std::vector<PreparedItem> out;
    out.reserve(corpus.items.size());
    for (const auto& item : corpus.items) {
        PreparedItem p;
        p.video_id = item.video_id;
        p.appearance = load_feature_tensor(corpus.resolve(item.appearance_path));
        p.motion = load_feature_tensor(corpus.resolve(item.motion_path));
        p.audio = load_feature_tensor(corpus.resolve(item.audio_path));
        for (const auto& cap : item.captions) p.caption_ids.push_back(vocab.encode(cap));
        p.attr_labels = attribute_labels(item, attrs);
        p.rho_em_gt = emotion_distribution(item, lexicon).rho;
        p.field_label = item.field_label;
        if (store && !item.video_embedding.empty()) {
            auto scores = similarity_scores(item.video_embedding, *store);
            auto sel = rank_and_select(
                scores, *store, cfg.n_t,
                exclude_self ? std::optional<std::string>(item.video_id) : std::nullopt);
            std::unordered_map<std::string, size_t> by_id;
            for (size_t i = 0; i < store_corpus.items.size(); ++i)
                by_id[store_corpus.items[i].video_id] = i;
            for (int64_t idx : sel.indices) {
                const auto& key = store->key(idx);
                const auto& cap = store_corpus.items.at(by_id.at(key.video_id))
                                      .captions.at(static_cast<size_t>(key.caption_idx));
                p.retrieved_ids.push_back(vocab.encode(cap));
            }
        }
        out.push_back(std::move(p));
    }
    return out;
}

namespace {

ModelDims dims_from(const Config& cfg, int vocab_size, int n_att, int n_ctg, int n_fld) {
    ModelDims d;
    d.d_h = cfg.d_h;
    d.d_b = cfg.d_b;
    d.d_e = cfg.d_e;
    d.heads = cfg.heads;
    d.n_layers = cfg.n_layers;
    d.l_max = cfg.l_max;
    d.vocab = vocab_size;
    d.n_att = n_att;
    d.n_ctg = n_ctg;
    d.n_fld = n_fld;
    d.k_top = cfg.k_top;
    return d;
}

} // namespace

TrainOutput run_training(const Config& config_in, const Corpus& corpus,
                         const EmotionLexicon& lexicon, const FieldTaxonomy& taxonomy,
                         const std::unordered_set<std::string>& stopwords,
                         const std::string& checkpoint_dir, const std::string& trainlog_path) {
    Config config = config_in;
    config.validate();
    if (corpus.items.empty()) throw std::runtime_error("training: empty corpus");
    for (const auto& item : corpus.items)
        if (item.field_label < 0 || item.field_label >= taxonomy.size())
            throw std::runtime_error("training: field label out of range for video '" +
                                     item.video_id + "'");

    std::vector<std::vector<std::string>> all_caps;
    for (const auto& item : corpus.items)
        for (const auto& cap : item.captions) all_caps.push_back(cap);
    Vocabulary vocab = Vocabulary::build(all_caps);
    AttributeVocabulary attrs = build_attribute_vocab(corpus, lexicon, stopwords,
                                                      config.top_k_factual);

    std::unique_ptr<EmbeddingStore> store;
    bool have_embeddings = false;
    for (const auto& item : corpus.items)
        if (!item.caption_embeddings.empty()) have_embeddings = true;
    if (config.text && have_embeddings)
        store = std::make_unique<EmbeddingStore>(EmbeddingStore::build(corpus));

    auto prepared = prepare_items(corpus, corpus, store.get(), vocab, attrs, lexicon, config,
                                  config.exclude_self);

    // fail fast on inconsistent feature widths before epoch 1
    for (const auto& p : prepared) {
        if (p.appearance.width != config.d_b || p.motion.width != config.d_b ||
            p.audio.width != config.d_b)
            throw shape_error("training: feature width for video '" + p.video_id +
                              "' does not match configured d_b " + std::to_string(config.d_b));
    }

    ModelDims dims = dims_from(config, vocab.size(), attrs.size(), lexicon.size(), taxonomy.size());
    SpectrumModel model(dims, config.seed);
    AblationFlags flags = config.flags();

    bool any_text = false;
    for (const auto& p : prepared)
        if (!p.retrieved_ids.empty()) any_text = true;
    auto active = model.active_params(flags, any_text);

    AdamConfig acfg;
    acfg.lr = config.lr;
    acfg.weight_decay = config.weight_decay;
    Adam adam(acfg);

    std::vector<std::pair<int, int>> pairs; // (item, caption)
    for (size_t i = 0; i < prepared.size(); ++i)
        for (size_t c = 0; c < prepared[i].caption_ids.size(); ++c)
            pairs.push_back({static_cast<int>(i), static_cast<int>(c)});

    Pcg32 shuffle_rng(config.seed, 21);
    TrainOutput out;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr_e = config.lr * std::pow(config.lr_decay, epoch);
        adam.set_lr(lr_e);
        // Fisher-Yates over the pair list
        for (size_t i = pairs.size(); i > 1; --i) {
            const size_t j = shuffle_rng.next_below(static_cast<uint32_t>(i));
            std::swap(pairs[i - 1], pairs[j]);
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr_e;
        int64_t n_pairs = 0;
        for (size_t start = 0; start < pairs.size(); start += static_cast<size_t>(config.batch)) {
            const size_t end = std::min(pairs.size(), start + static_cast<size_t>(config.batch));
            Tensor batch_loss;
            for (size_t k = start; k < end; ++k) {
                const auto& [ii, ci] = pairs[k];
                auto parts = model.losses(prepared[static_cast<size_t>(ii)],
                                          static_cast<size_t>(ci), flags, attrs);
                stats.total += parts.total.item();
                stats.l_cap += parts.caption.item();
                if (parts.m2s.defined()) stats.l_m2s += parts.m2s.item();
                if (parts.field.defined()) stats.l_field += parts.field.item();
                batch_loss = batch_loss.defined() ? ops::add(batch_loss, parts.total) : parts.total;
                ++n_pairs;
            }
            batch_loss = ops::scale(batch_loss, 1.0 / static_cast<double>(end - start));
            backward(batch_loss);
            // parameters a batch never touched carry a zero gradient
            for (auto& p : active) ops::ensure_grad(*p.tensor.raw());
            adam.step(active);
            Adam::zero_grad(active);
        }
        const double inv = n_pairs > 0 ? 1.0 / static_cast<double>(n_pairs) : 0.0;
        stats.total *= inv;
        stats.l_cap *= inv;
        stats.l_m2s *= inv;
        stats.l_field *= inv;
        stats.wall_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.log.epochs.push_back(stats);
    }

    out.bundle.config = config;
    out.bundle.dims = dims;
    out.bundle.model = std::move(model);
    out.bundle.vocab = vocab;
    out.bundle.attrs = attrs;
    out.bundle.lexicon = lexicon;
    out.bundle.taxonomy = taxonomy;

    if (!checkpoint_dir.empty())
        save_checkpoint(checkpoint_dir, out.bundle.model, config, vocab, attrs, lexicon, taxonomy);
    if (!trainlog_path.empty()) out.log.to_jsonl(trainlog_path);
    return out;
}

EvalOutput run_eval(CheckpointBundle& bundle, const Config& config, const Corpus& test_corpus,
                    const Corpus* store_corpus, const EmbeddingStore* store) {
    AblationFlags flags = config.flags();
    auto prepared = prepare_items(test_corpus, store_corpus ? *store_corpus : test_corpus,
                                  store, bundle.vocab, bundle.attrs, bundle.lexicon, config,
                                  /*exclude_self=*/false);
    const size_t n = prepared.size();
    std::vector<std::vector<std::string>> candidates(n);

    int threads = config.threads > 0 ? config.threads
                                     : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= n) return;
            auto hyp = bundle.model.decode(prepared[i], flags, bundle.attrs, config.beam);
            candidates[i] = bundle.vocab.decode(hyp.tokens);
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<std::vector<metrics::TokenList>> references;
    std::vector<metrics::EmotionGroundTruth> truth;
    for (const auto& item : test_corpus.items) {
        references.push_back(item.captions);
        truth.push_back(metrics::emotion_ground_truth(item.captions, bundle.lexicon));
    }
    EvalOutput out;
    out.report = metrics::report(candidates, references, truth, bundle.lexicon);
    out.candidates = std::move(candidates);
    return out;
}

} // namespace spectrum
