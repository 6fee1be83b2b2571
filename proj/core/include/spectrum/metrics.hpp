#pragma once

#include <set>
#include <string>
#include <vector>

#include "spectrum/lexicon.hpp"

namespace spectrum::metrics {

using TokenList = std::vector<std::string>;

// ---- factual metrics ----

// Corpus-level BLEU-n: clipped modified n-gram precision, geometric mean
// over 1..n, multiplicative brevity penalty. Returns a fraction in [0,1].
double bleu(const std::vector<TokenList>& candidates,
            const std::vector<std::vector<TokenList>>& references, int n);

// LCS F-measure (beta = 1.2), max over references.
double rouge_l(const TokenList& candidate, const std::vector<TokenList>& references,
               double beta = 1.2);
double rouge_l_corpus(const std::vector<TokenList>& candidates,
                      const std::vector<std::vector<TokenList>>& references, double beta = 1.2);

struct CiderResult {
    double score = 0.0;     // mean over n of averaged TF-IDF cosines, x10
    bool degenerate = false; // single-item corpus: IDF carries no signal
};

// TF-IDF n-gram cosine (n = 1..4) against each reference, averaged, with
// document frequencies taken from the reference corpus.
CiderResult cider(const std::vector<TokenList>& candidates,
                  const std::vector<std::vector<TokenList>>& references);

// Unigram alignment (exact then stemmed), F_mean = 10PR/(R+9P), chunk
// fragmentation penalty 0.5*(chunks/matches)^3, max over references.
double meteor_lite(const TokenList& candidate, const std::vector<TokenList>& references);
double meteor_corpus(const std::vector<TokenList>& candidates,
                     const std::vector<std::vector<TokenList>>& references);

// Light Porter-style suffix stripper used by the stem-match stage.
std::string stem(const std::string& word);

// ---- emotion metrics ----

struct EmotionGroundTruth {
    std::set<std::string> word_set; // emotion words present in any reference
    std::set<int> dominant;         // argmax categories of the reference counts
};

EmotionGroundTruth emotion_ground_truth(const std::vector<TokenList>& references,
                                        const EmotionLexicon& lexicon);

// Word level: a candidate is correct when it contains at least one emotion
// word and all of them appear in the ground-truth emotion word set.
double acc_sw(const std::vector<TokenList>& candidates,
              const std::vector<EmotionGroundTruth>& truth, const EmotionLexicon& lexicon);

// Sentence level: the candidate's dominant category set must equal the
// ground truth's. Emotion-free candidates are incorrect.
double acc_c(const std::vector<TokenList>& candidates,
             const std::vector<EmotionGroundTruth>& truth, const EmotionLexicon& lexicon);

// ---- holistic metrics ----

// Harmonic-style blend of a fluency score with the sentence-level emotion
// accuracy; inputs on the 0-100 scale, gamma weights emotion above fluency.
double holistic_blend(double fluency, double emotion_acc, double gamma = 1.5);

// Sum aggregate: BLEU-4 + METEOR + ROUGE-L + CIDEr, all on the 0-100 scale.
double sum_metric(double bleu4, double meteor, double rouge, double cider);

// ---- assembled report ----

struct MetricReport {
    // all values on the 0-100 reporting scale
    double bleu1 = 0, bleu2 = 0, bleu3 = 0, bleu4 = 0;
    double meteor = 0, rouge_l = 0, cider = 0, sum = 0;
    double acc_sw = 0, acc_c = 0, bfs = 0, cfs = 0;
    bool cider_degenerate = false;

    std::string to_json() const; // canonical: fixed key order, 4 decimals
    std::string to_csv_row() const;
    static std::string csv_header();
};

MetricReport report(const std::vector<TokenList>& candidates,
                    const std::vector<std::vector<TokenList>>& references,
                    const std::vector<EmotionGroundTruth>& truth, const EmotionLexicon& lexicon,
                    double gamma = 1.5);

} // namespace spectrum::metrics
