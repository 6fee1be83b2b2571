#pragma once

#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace spectrum {

struct Corpus; // feature_io.hpp

// Coarse emotion categories, each a bag of fine-grained synonyms.
class EmotionLexicon {
  public:
    struct Category {
        std::string name;
        std::vector<std::string> words;
    };

    static EmotionLexicon load(const std::string& path);
    static EmotionLexicon from_categories(std::vector<Category> categories);

    int size() const { return static_cast<int>(categories_.size()); }
    const std::vector<Category>& categories() const { return categories_; }
    const Category& category(int idx) const { return categories_.at(static_cast<size_t>(idx)); }

    // -1 when the word is not an emotion word
    int category_of(const std::string& word) const;
    bool is_emotion_word(const std::string& word) const { return category_of(word) >= 0; }

  private:
    std::vector<Category> categories_;
    std::unordered_map<std::string, int> word_to_category_;
};

class FieldTaxonomy {
  public:
    static FieldTaxonomy load(const std::string& path);
    static FieldTaxonomy from_names(std::vector<std::string> names);

    int size() const { return static_cast<int>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(int idx) const { return names_.at(static_cast<size_t>(idx)); }
    int index_of(const std::string& name) const; // -1 when absent

  private:
    std::vector<std::string> names_;
};

std::unordered_set<std::string> load_stopwords(const std::string& path);

// Attribute concepts tracked by the probability head: every lexicon fine
// word present in the corpus, plus the most frequent factual words.
class AttributeVocabulary {
  public:
    struct Attribute {
        std::string word;
        bool emotional = false;
        int category = -1; // lexicon category for emotional attributes
    };

    int size() const { return static_cast<int>(attrs_.size()); }
    const std::vector<Attribute>& attributes() const { return attrs_; }
    const Attribute& attribute(int idx) const { return attrs_.at(static_cast<size_t>(idx)); }
    int index_of(const std::string& word) const;

    // index groups per lexicon category (empty when no attribute maps there)
    const std::vector<std::vector<int>>& category_groups() const { return category_groups_; }

    static AttributeVocabulary from_attributes(std::vector<Attribute> attrs, int n_categories);

    friend AttributeVocabulary build_attribute_vocab(const Corpus&, const EmotionLexicon&,
                                                     const std::unordered_set<std::string>&, int);

  private:
    std::vector<Attribute> attrs_;
    std::unordered_map<std::string, int> index_;
    std::vector<std::vector<int>> category_groups_;
};

class empty_attribute_set_error : public std::runtime_error {
  public:
    empty_attribute_set_error() : std::runtime_error("attribute set would be empty") {}
};

AttributeVocabulary build_attribute_vocab(const Corpus& corpus, const EmotionLexicon& lexicon,
                                          const std::unordered_set<std::string>& stopwords,
                                          int top_k_factual);

struct CorpusItem; // feature_io.hpp

// v[i] = 1 iff attribute i occurs in any ground-truth caption of the item.
std::vector<float> attribute_labels(const CorpusItem& item, const AttributeVocabulary& attrs);

struct EmotionDistribution {
    std::vector<double> rho; // simplex over categories
    bool degenerate = false; // no emotion word found; rho is uniform
};

// Fine-word counts per category across all captions, normalized to sum 1.
EmotionDistribution emotion_distribution(const CorpusItem& item, const EmotionLexicon& lexicon);

} // namespace spectrum
