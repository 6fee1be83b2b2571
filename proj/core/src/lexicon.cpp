#include "spectrum/lexicon.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "spectrum/feature_io.hpp"
#include <json.hpp>

namespace spectrum {

EmotionLexicon EmotionLexicon::from_categories(std::vector<Category> categories) {
    EmotionLexicon lex;
    lex.categories_ = std::move(categories);
    for (int c = 0; c < lex.size(); ++c) {
        const auto& cat = lex.categories_[static_cast<size_t>(c)];
        if (cat.words.empty())
            throw std::runtime_error("lexicon: category '" + cat.name + "' has no fine words");
        for (const auto& w : cat.words) {
            auto [it, inserted] = lex.word_to_category_.emplace(w, c);
            if (!inserted)
                throw std::runtime_error("lexicon: fine word '" + w +
                                         "' appears in more than one category");
        }
    }
    return lex;
}

EmotionLexicon EmotionLexicon::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("lexicon: cannot open " + path);
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(is);
    std::vector<Category> cats;
    for (auto it = j.begin(); it != j.end(); ++it) {
        Category c;
        c.name = it.key();
        for (const auto& w : it.value()) c.words.push_back(w.get<std::string>());
        cats.push_back(std::move(c));
    }
    return from_categories(std::move(cats));
}

int EmotionLexicon::category_of(const std::string& word) const {
    auto it = word_to_category_.find(word);
    return it == word_to_category_.end() ? -1 : it->second;
}

FieldTaxonomy FieldTaxonomy::from_names(std::vector<std::string> names) {
    FieldTaxonomy t;
    std::set<std::string> seen;
    for (const auto& n : names)
        if (!seen.insert(n).second)
            throw std::runtime_error("taxonomy: duplicate field name '" + n + "'");
    t.names_ = std::move(names);
    return t;
}

FieldTaxonomy FieldTaxonomy::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("taxonomy: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(is);
    std::vector<std::string> names;
    for (const auto& n : j) names.push_back(n.get<std::string>());
    return from_names(std::move(names));
}

int FieldTaxonomy::index_of(const std::string& name) const {
    for (int i = 0; i < size(); ++i)
        if (names_[static_cast<size_t>(i)] == name) return i;
    return -1;
}

std::unordered_set<std::string> load_stopwords(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("stopwords: cannot open " + path);
    std::unordered_set<std::string> out;
    std::string line;
    while (std::getline(is, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty() && line[0] != '#') out.insert(line);
    }
    return out;
}

int AttributeVocabulary::index_of(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? -1 : it->second;
}

AttributeVocabulary AttributeVocabulary::from_attributes(std::vector<Attribute> attrs,
                                                         int n_categories) {
    AttributeVocabulary av;
    av.attrs_ = std::move(attrs);
    av.category_groups_.assign(static_cast<size_t>(n_categories), {});
    for (int i = 0; i < av.size(); ++i) {
        const auto& a = av.attrs_[static_cast<size_t>(i)];
        av.index_[a.word] = i;
        if (a.emotional) av.category_groups_[static_cast<size_t>(a.category)].push_back(i);
    }
    return av;
}

AttributeVocabulary build_attribute_vocab(const Corpus& corpus, const EmotionLexicon& lexicon,
                                          const std::unordered_set<std::string>& stopwords,
                                          int top_k_factual) {
    // ordered maps keep the result a pure function of the inputs
    std::map<std::string, int64_t> counts;
    for (const auto& item : corpus.items)
        for (const auto& cap : item.captions)
            for (const auto& tok : cap) ++counts[tok];

    std::vector<AttributeVocabulary::Attribute> attrs;
    for (const auto& [word, n] : counts) {
        (void)n;
        int cat = lexicon.category_of(word);
        if (cat >= 0) attrs.push_back({word, true, cat});
    }

    std::vector<std::pair<std::string, int64_t>> factual;
    for (const auto& [word, n] : counts) {
        if (stopwords.count(word) || lexicon.is_emotion_word(word)) continue;
        factual.push_back({word, n});
    }
    // frequency desc, then lexicographic asc: the stable tie rule
    std::sort(factual.begin(), factual.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    const size_t keep = std::min<size_t>(factual.size(), static_cast<size_t>(top_k_factual));
    for (size_t i = 0; i < keep; ++i) attrs.push_back({factual[i].first, false, -1});

    if (attrs.empty()) throw empty_attribute_set_error();
    return AttributeVocabulary::from_attributes(std::move(attrs), lexicon.size());
}

std::vector<float> attribute_labels(const CorpusItem& item, const AttributeVocabulary& attrs) {
    std::unordered_set<std::string> present;
    for (const auto& cap : item.captions) present.insert(cap.begin(), cap.end());
    std::vector<float> v(static_cast<size_t>(attrs.size()), 0.0f);
    for (int i = 0; i < attrs.size(); ++i)
        if (present.count(attrs.attribute(i).word)) v[static_cast<size_t>(i)] = 1.0f;
    return v;
}

EmotionDistribution emotion_distribution(const CorpusItem& item, const EmotionLexicon& lexicon) {
    EmotionDistribution d;
    d.rho.assign(static_cast<size_t>(lexicon.size()), 0.0);
    double total = 0;
    for (const auto& cap : item.captions)
        for (const auto& tok : cap) {
            int cat = lexicon.category_of(tok);
            if (cat >= 0) {
                d.rho[static_cast<size_t>(cat)] += 1.0;
                total += 1.0;
            }
        }
    if (total == 0) {
        d.degenerate = true;
        const double u = 1.0 / static_cast<double>(lexicon.size());
        std::fill(d.rho.begin(), d.rho.end(), u);
    } else {
        for (auto& x : d.rho) x /= total;
    }
    return d;
}

} // namespace spectrum
