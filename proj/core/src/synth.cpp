#include "spectrum/synth.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "spectrum/hash.hpp"
#include "spectrum/rng.hpp"
#include "spectrum/text.hpp"
#include <json.hpp>

namespace spectrum {

namespace {

// Curated factual pools for the default 20-field taxonomy; other taxonomy
// sizes fall back to generated tokens.
const std::vector<std::vector<std::string>> kNounPools = {
    {"guitar", "piano", "drums", "violin", "singer", "concert"},
    {"man", "woman", "crowd", "child", "friends", "stranger"},
    {"console", "controller", "arcade", "player", "screen", "joystick"},
    {"ball", "court", "goal", "race", "team", "stadium"},
    {"reporter", "anchor", "studio", "broadcast", "interview", "headline"},
    {"teacher", "classroom", "lesson", "student", "blackboard", "lecture"},
    {"host", "audience", "stage", "camera", "episode", "contest"},
    {"actor", "scene", "trailer", "director", "theater", "film"},
    {"cartoon", "character", "drawing", "sketch", "animator", "storyboard"},
    {"car", "truck", "motorcycle", "engine", "wheel", "garage"},
    {"tutorial", "steps", "tools", "workbench", "glue", "instructions"},
    {"suitcase", "airport", "beach", "mountain", "tourist", "journey"},
    {"laboratory", "experiment", "microscope", "rocket", "scientist", "formula"},
    {"dog", "cat", "horse", "bird", "elephant", "monkey"},
    {"baby", "toddler", "parents", "playground", "toys", "birthday"},
    {"narrator", "footage", "archive", "history", "culture", "tradition"},
    {"pizza", "burger", "salad", "dessert", "restaurant", "snack"},
    {"chef", "kitchen", "recipe", "oven", "pan", "ingredients"},
    {"makeup", "dress", "model", "runway", "lipstick", "hairstyle"},
    {"product", "brand", "commercial", "slogan", "logo", "billboard"},
};

const std::vector<std::string> kVerbPool = {"plays", "watches", "holds",  "shows", "rides",
                                            "dances", "builds",  "throws", "paints", "carries"};

std::vector<std::string> noun_pool(int field, int n_fields) {
    if (n_fields <= static_cast<int>(kNounPools.size()))
        return kNounPools[static_cast<size_t>(field)];
    std::vector<std::string> gen;
    for (int j = 0; j < 6; ++j)
        gen.push_back("thing" + std::to_string(field) + "x" + std::to_string(j));
    return gen;
}

// Stable prototype vector for a (tag, index) pair: the same seed always
// reproduces the same direction regardless of draw order elsewhere.
std::vector<float> prototype(uint64_t seed, const std::string& tag, int index, int dim,
                             double scale) {
    Pcg32 rng(fnv1a64(tag, seed), static_cast<uint64_t>(index) + 17);
    std::vector<float> v(static_cast<size_t>(dim));
    for (auto& x : v) x = static_cast<float>(rng.normal() * scale);
    return v;
}

void add_into(std::vector<float>& acc, const std::vector<float>& v, float w) {
    for (size_t i = 0; i < acc.size(); ++i) acc[i] += w * v[i];
}

std::string join(const std::vector<std::string>& toks) {
    std::string s;
    for (size_t i = 0; i < toks.size(); ++i) {
        if (i) s.push_back(' ');
        s += toks[i];
    }
    return s;
}

nlohmann::ordered_json item_to_json(const CorpusItem& item,
                                    const std::vector<std::string>& caption_strings) {
    nlohmann::ordered_json j;
    j["video_id"] = item.video_id;
    j["appearance"] = item.appearance_path;
    j["motion"] = item.motion_path;
    j["audio"] = item.audio_path;
    j["captions"] = caption_strings;
    j["field"] = item.field_label;
    nlohmann::ordered_json embs = nlohmann::ordered_json::array();
    for (const auto& e : item.caption_embeddings) embs.push_back(e);
    j["caption_embeddings"] = embs;
    j["video_embedding"] = item.video_embedding;
    return j;
}

} // namespace

SynthResult synth_corpus(const SynthConfig& cfg, uint64_t seed, const EmotionLexicon& lexicon,
                         const FieldTaxonomy& taxonomy, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "features");

    SynthResult res;
    res.corpus.base_dir = out_dir;
    std::vector<std::vector<std::string>> caption_strings_per_item;

    const int n_fields = taxonomy.size();
    const int n_cats = lexicon.size();

    for (int v = 0; v < cfg.videos; ++v) {
        Pcg32 rng(seed, 1000 + static_cast<uint64_t>(v));
        PlantedItem plant;
        plant.field = static_cast<int>(rng.next_below(static_cast<uint32_t>(n_fields)));
        plant.category = static_cast<int>(rng.next_below(static_cast<uint32_t>(n_cats)));
        const auto& bag = lexicon.category(plant.category).words;
        plant.emotion_word = bag[rng.next_below(static_cast<uint32_t>(bag.size()))];

        auto pool = noun_pool(plant.field, n_fields);
        std::vector<int> picks;
        while (static_cast<int>(picks.size()) < cfg.nouns_per_video) {
            int p = static_cast<int>(rng.next_below(static_cast<uint32_t>(pool.size())));
            if (std::find(picks.begin(), picks.end(), p) == picks.end()) picks.push_back(p);
        }
        for (int p : picks) plant.factual_words.push_back(pool[static_cast<size_t>(p)]);
        const std::string verb = kVerbPool[rng.next_below(static_cast<uint32_t>(kVerbPool.size()))];
        plant.factual_words.push_back(verb);

        CorpusItem item;
        char idbuf[16];
        std::snprintf(idbuf, sizeof(idbuf), "vid%04d", v);
        item.video_id = idbuf;
        item.field_label = plant.field;

        // caption templates: fillers are stopwords so only planted words
        // survive attribute selection
        const std::string& n1 = plant.factual_words[0];
        const std::string& n2 = plant.factual_words[1];
        const std::string& em = plant.emotion_word;
        std::vector<std::string> caps;
        for (int c = 0; c < cfg.captions_per_video; ++c) {
            switch ((v + c) % 4) {
                case 0: caps.push_back("a " + n1 + " " + verb + " the " + n2 + " " + em); break;
                case 1: caps.push_back("the " + n1 + " " + verb + " a " + n2 + " " + em); break;
                case 2:
                    caps.push_back("a " + n1 + " " + verb + " the " + n2 + " very " + em);
                    break;
                default:
                    caps.push_back("there is a " + n1 + " that " + verb + " the " + n2 + " " + em);
                    break;
            }
        }
        for (const auto& c : caps) item.captions.push_back(tokenize(c));

        // all planted words leave a signature in every modality
        std::vector<std::string> all_words = plant.factual_words;
        all_words.push_back(em);
        auto gen_features = [&](const char* tag, Modality mod, int tokens) {
            std::vector<float> base(static_cast<size_t>(cfg.d_b), 0.0f);
            add_into(base, prototype(seed, std::string(tag) + ".field", plant.field, cfg.d_b, 1.0),
                     1.0f);
            add_into(base,
                     prototype(seed, std::string(tag) + ".category", plant.category, cfg.d_b, 1.0),
                     1.0f);
            for (const auto& w : all_words) {
                auto sig = prototype(seed, std::string(tag) + ".word." + w, 0, cfg.d_b, 0.7);
                add_into(base, sig, 1.0f / static_cast<float>(all_words.size()));
            }
            FeatureSequence f;
            f.modality = mod;
            f.tokens = tokens;
            f.width = cfg.d_b;
            f.matrix.resize(static_cast<size_t>(tokens * cfg.d_b));
            for (int t = 0; t < tokens; ++t)
                for (int c = 0; c < cfg.d_b; ++c)
                    f.at(t, c) = base[static_cast<size_t>(c)] +
                                 static_cast<float>(rng.normal() * cfg.feature_noise);
            return f;
        };

        auto app = gen_features("app", Modality::appearance, cfg.n_appearance);
        auto mot = gen_features("mot", Modality::motion, cfg.n_motion);
        auto aud = gen_features("aud", Modality::audio, cfg.n_audio);
        item.appearance_path = "features/" + item.video_id + "_app.spft";
        item.motion_path = "features/" + item.video_id + "_mot.spft";
        item.audio_path = "features/" + item.video_id + "_aud.spft";
        save_feature_tensor((fs::path(out_dir) / item.appearance_path).string(), app);
        save_feature_tensor((fs::path(out_dir) / item.motion_path).string(), mot);
        save_feature_tensor((fs::path(out_dir) / item.audio_path).string(), aud);

        // retrieval embeddings correlate captions with their video theme
        auto theme = prototype(seed, "embed.theme", plant.field * n_cats + plant.category, cfg.d_r,
                               1.0);
        item.video_embedding = theme;
        for (auto& x : item.video_embedding)
            x += static_cast<float>(rng.normal() * cfg.embed_noise);
        for (int c = 0; c < cfg.captions_per_video; ++c) {
            auto e = theme;
            for (auto& x : e) x += static_cast<float>(rng.normal() * cfg.embed_noise);
            item.caption_embeddings.push_back(std::move(e));
        }

        caption_strings_per_item.push_back(caps);
        res.corpus.items.push_back(std::move(item));
        res.planted.push_back(std::move(plant));
    }

    const int n_test = static_cast<int>(cfg.test_fraction * cfg.videos);
    const int n_train = cfg.videos - n_test;

    auto write_manifest = [&](const std::string& name, int begin, int end) {
        std::string path = (fs::path(out_dir) / name).string();
        std::ofstream os(path, std::ios::binary);
        for (int i = begin; i < end; ++i)
            os << item_to_json(res.corpus.items[static_cast<size_t>(i)],
                               caption_strings_per_item[static_cast<size_t>(i)])
                      .dump()
               << "\n";
        return path;
    };
    res.manifest_path = write_manifest("manifest.jsonl", 0, cfg.videos);
    res.train_manifest_path = write_manifest("manifest_train.jsonl", 0, n_train);
    res.test_manifest_path = write_manifest("manifest_test.jsonl", n_train, cfg.videos);
    return res;
}

} // namespace spectrum
