#include "spectrum/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

namespace spectrum::metrics {

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, int64_t> ngram_counts(const TokenList& tokens, int n) {
    std::map<Ngram, int64_t> counts;
    if (static_cast<int>(tokens.size()) < n) return counts;
    for (size_t i = 0; i + static_cast<size_t>(n) <= tokens.size(); ++i)
        ++counts[Ngram(tokens.begin() + static_cast<int64_t>(i),
                       tokens.begin() + static_cast<int64_t>(i) + n)];
    return counts;
}

int64_t lcs_length(const TokenList& a, const TokenList& b) {
    const size_t n = a.size(), m = b.size();
    std::vector<int64_t> prev(m + 1, 0), cur(m + 1, 0);
    for (size_t i = 1; i <= n; ++i) {
        for (size_t j = 1; j <= m; ++j) {
            if (a[i - 1] == b[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

} // namespace

double bleu(const std::vector<TokenList>& candidates,
            const std::vector<std::vector<TokenList>>& references, int n) {
    if (n < 1) throw std::runtime_error("bleu: order must be >= 1");
    if (candidates.size() != references.size())
        throw std::runtime_error("bleu: candidate/reference count mismatch");
    std::vector<int64_t> clipped(static_cast<size_t>(n), 0);
    std::vector<int64_t> total(static_cast<size_t>(n), 0);
    int64_t cand_len = 0, ref_len = 0;
    for (size_t i = 0; i < candidates.size(); ++i) {
        const auto& cand = candidates[i];
        const auto& refs = references[i];
        if (refs.empty()) throw std::runtime_error("bleu: item without references");
        cand_len += static_cast<int64_t>(cand.size());
        // closest reference length; ties take the shorter one
        int64_t best = static_cast<int64_t>(refs[0].size());
        for (const auto& r : refs) {
            const int64_t len = static_cast<int64_t>(r.size());
            const int64_t d_new = std::llabs(len - static_cast<int64_t>(cand.size()));
            const int64_t d_old = std::llabs(best - static_cast<int64_t>(cand.size()));
            if (d_new < d_old || (d_new == d_old && len < best)) best = len;
        }
        ref_len += best;
        for (int k = 1; k <= n; ++k) {
            auto cc = ngram_counts(cand, k);
            std::map<Ngram, int64_t> max_ref;
            for (const auto& r : refs)
                for (const auto& [g, c] : ngram_counts(r, k))
                    max_ref[g] = std::max(max_ref[g], c);
            for (const auto& [g, c] : cc) {
                total[static_cast<size_t>(k - 1)] += c;
                auto it = max_ref.find(g);
                if (it != max_ref.end())
                    clipped[static_cast<size_t>(k - 1)] += std::min(c, it->second);
            }
        }
    }
    double log_sum = 0;
    for (int k = 0; k < n; ++k) {
        if (clipped[static_cast<size_t>(k)] == 0 || total[static_cast<size_t>(k)] == 0) return 0.0;
        log_sum += std::log(static_cast<double>(clipped[static_cast<size_t>(k)]) /
                            static_cast<double>(total[static_cast<size_t>(k)]));
    }
    double bp = 1.0;
    if (cand_len < ref_len && cand_len > 0)
        bp = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
    if (cand_len == 0) return 0.0;
    return bp * std::exp(log_sum / n);
}

double rouge_l(const TokenList& candidate, const std::vector<TokenList>& references, double beta) {
    if (references.empty()) throw std::runtime_error("rouge_l: no references");
    double best = 0.0;
    for (const auto& ref : references) {
        if (candidate.empty() || ref.empty()) continue;
        const double lcs = static_cast<double>(lcs_length(candidate, ref));
        if (lcs == 0) continue;
        const double p = lcs / static_cast<double>(candidate.size());
        const double r = lcs / static_cast<double>(ref.size());
        const double b2 = beta * beta;
        best = std::max(best, (1.0 + b2) * p * r / (r + b2 * p));
    }
    return best;
}

double rouge_l_corpus(const std::vector<TokenList>& candidates,
                      const std::vector<std::vector<TokenList>>& references, double beta) {
    if (candidates.size() != references.size())
        throw std::runtime_error("rouge_l: candidate/reference count mismatch");
    if (candidates.empty()) return 0.0;
    double acc = 0;
    for (size_t i = 0; i < candidates.size(); ++i) acc += rouge_l(candidates[i], references[i], beta);
    return acc / static_cast<double>(candidates.size());
}

CiderResult cider(const std::vector<TokenList>& candidates,
                  const std::vector<std::vector<TokenList>>& references) {
    if (candidates.size() != references.size())
        throw std::runtime_error("cider: candidate/reference count mismatch");
    CiderResult res;
    const size_t items = candidates.size();
    if (items == 0) return res;
    res.degenerate = items == 1;
    const double n_docs = static_cast<double>(items);
    double corpus_acc = 0;
    for (int n = 1; n <= 4; ++n) {
        // document frequency over reference sets
        std::map<Ngram, int64_t> df;
        for (const auto& refs : references) {
            std::set<Ngram> in_item;
            for (const auto& r : refs)
                for (const auto& [g, c] : ngram_counts(r, n)) {
                    (void)c;
                    in_item.insert(g);
                }
            for (const auto& g : in_item) ++df[g];
        }
        auto idf = [&](const Ngram& g) {
            auto it = df.find(g);
            const double d = it == df.end() ? 1.0 : std::max<double>(1.0, static_cast<double>(it->second));
            return std::log(n_docs / d);
        };
        double level_acc = 0;
        for (size_t i = 0; i < items; ++i) {
            auto cand_tf = ngram_counts(candidates[i], n);
            std::map<Ngram, double> cand_vec;
            double cnorm = 0;
            for (const auto& [g, c] : cand_tf) {
                const double w = static_cast<double>(c) * idf(g);
                cand_vec[g] = w;
                cnorm += w * w;
            }
            cnorm = std::sqrt(cnorm);
            double ref_acc = 0;
            for (const auto& r : references[i]) {
                auto ref_tf = ngram_counts(r, n);
                double rnorm = 0, dot = 0;
                for (const auto& [g, c] : ref_tf) {
                    const double w = static_cast<double>(c) * idf(g);
                    rnorm += w * w;
                    auto it = cand_vec.find(g);
                    if (it != cand_vec.end()) dot += w * it->second;
                }
                rnorm = std::sqrt(rnorm);
                if (cnorm > 0 && rnorm > 0) ref_acc += dot / (cnorm * rnorm);
            }
            level_acc += references[i].empty() ? 0.0 : ref_acc / static_cast<double>(references[i].size());
        }
        corpus_acc += level_acc / static_cast<double>(items);
    }
    res.score = 10.0 * corpus_acc / 4.0;
    return res;
}

std::string stem(const std::string& word) {
    std::string w = word;
    auto ends = [&](const char* suf) {
        const size_t n = std::string(suf).size();
        return w.size() >= n && w.compare(w.size() - n, n, suf) == 0;
    };
    auto chop = [&](size_t n) { w.resize(w.size() - n); };
    if (ends("sses")) chop(2);
    else if (ends("ies")) chop(2);
    else if (ends("ss")) {
    } else if (ends("s") && w.size() >= 4) chop(1);
    if (ends("ing") && w.size() >= 6) chop(3);
    else if (ends("ed") && w.size() >= 5) chop(2);
    if (ends("ly") && w.size() >= 5) chop(2);
    return w;
}

namespace {

struct Alignment {
    int64_t matches = 0;
    int64_t chunks = 0;
};

// Greedy two-pass 1-1 alignment: exact matches first, stem matches on the
// leftovers; chunks counted over candidate order.
Alignment align(const TokenList& cand, const TokenList& ref) {
    Alignment a;
    std::vector<int64_t> cand_to_ref(cand.size(), -1);
    std::vector<bool> ref_used(ref.size(), false);
    for (size_t i = 0; i < cand.size(); ++i)
        for (size_t j = 0; j < ref.size(); ++j)
            if (!ref_used[j] && cand[i] == ref[j]) {
                cand_to_ref[i] = static_cast<int64_t>(j);
                ref_used[j] = true;
                break;
            }
    for (size_t i = 0; i < cand.size(); ++i) {
        if (cand_to_ref[i] >= 0) continue;
        const std::string cs = stem(cand[i]);
        for (size_t j = 0; j < ref.size(); ++j)
            if (!ref_used[j] && cs == stem(ref[j])) {
                cand_to_ref[i] = static_cast<int64_t>(j);
                ref_used[j] = true;
                break;
            }
    }
    int64_t prev_i = -10, prev_j = -10;
    for (size_t i = 0; i < cand.size(); ++i) {
        if (cand_to_ref[i] < 0) continue;
        ++a.matches;
        if (!(static_cast<int64_t>(i) == prev_i + 1 && cand_to_ref[i] == prev_j + 1)) ++a.chunks;
        prev_i = static_cast<int64_t>(i);
        prev_j = cand_to_ref[i];
    }
    return a;
}

} // namespace

double meteor_lite(const TokenList& candidate, const std::vector<TokenList>& references) {
    if (references.empty()) throw std::runtime_error("meteor: no references");
    double best = 0.0;
    for (const auto& ref : references) {
        if (candidate.empty() || ref.empty()) continue;
        auto a = align(candidate, ref);
        if (a.matches == 0) continue;
        const double m = static_cast<double>(a.matches);
        const double p = m / static_cast<double>(candidate.size());
        const double r = m / static_cast<double>(ref.size());
        const double f = 10.0 * p * r / (r + 9.0 * p);
        const double frag = static_cast<double>(a.chunks) / m;
        best = std::max(best, f * (1.0 - 0.5 * frag * frag * frag));
    }
    return best;
}

double meteor_corpus(const std::vector<TokenList>& candidates,
                     const std::vector<std::vector<TokenList>>& references) {
    if (candidates.size() != references.size())
        throw std::runtime_error("meteor: candidate/reference count mismatch");
    if (candidates.empty()) return 0.0;
    double acc = 0;
    for (size_t i = 0; i < candidates.size(); ++i)
        acc += meteor_lite(candidates[i], references[i]);
    return acc / static_cast<double>(candidates.size());
}

EmotionGroundTruth emotion_ground_truth(const std::vector<TokenList>& references,
                                        const EmotionLexicon& lexicon) {
    EmotionGroundTruth gt;
    std::vector<int64_t> counts(static_cast<size_t>(lexicon.size()), 0);
    for (const auto& ref : references)
        for (const auto& tok : ref) {
            const int cat = lexicon.category_of(tok);
            if (cat >= 0) {
                gt.word_set.insert(tok);
                ++counts[static_cast<size_t>(cat)];
            }
        }
    int64_t best = 0;
    for (int64_t c : counts) best = std::max(best, c);
    if (best > 0)
        for (size_t c = 0; c < counts.size(); ++c)
            if (counts[c] == best) gt.dominant.insert(static_cast<int>(c));
    return gt;
}

double acc_sw(const std::vector<TokenList>& candidates,
              const std::vector<EmotionGroundTruth>& truth, const EmotionLexicon& lexicon) {
    if (candidates.size() != truth.size())
        throw std::runtime_error("acc_sw: candidate/truth count mismatch");
    if (candidates.empty()) return 0.0;
    int64_t correct = 0;
    for (size_t i = 0; i < candidates.size(); ++i) {
        bool any = false, all_in = true;
        for (const auto& tok : candidates[i]) {
            if (!lexicon.is_emotion_word(tok)) continue;
            any = true;
            if (!truth[i].word_set.count(tok)) all_in = false;
        }
        if (any && all_in) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(candidates.size());
}

double acc_c(const std::vector<TokenList>& candidates,
             const std::vector<EmotionGroundTruth>& truth, const EmotionLexicon& lexicon) {
    if (candidates.size() != truth.size())
        throw std::runtime_error("acc_c: candidate/truth count mismatch");
    if (candidates.empty()) return 0.0;
    int64_t correct = 0;
    for (size_t i = 0; i < candidates.size(); ++i) {
        std::vector<int64_t> counts(static_cast<size_t>(lexicon.size()), 0);
        int64_t best = 0;
        for (const auto& tok : candidates[i]) {
            const int cat = lexicon.category_of(tok);
            if (cat >= 0) best = std::max(best, ++counts[static_cast<size_t>(cat)]);
        }
        if (best == 0 || truth[i].dominant.empty()) continue;
        std::set<int> cand_dominant;
        for (size_t c = 0; c < counts.size(); ++c)
            if (counts[c] == best) cand_dominant.insert(static_cast<int>(c));
        if (cand_dominant == truth[i].dominant) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(candidates.size());
}

double holistic_blend(double fluency, double emotion_acc, double gamma) {
    if (fluency < 0 || emotion_acc < 0)
        throw std::runtime_error("holistic: negative component score");
    const double g2 = gamma * gamma;
    const double denom = g2 * emotion_acc + fluency;
    if (denom == 0) return 0.0;
    return (1.0 + g2) * fluency * emotion_acc / denom;
}

double sum_metric(double bleu4, double meteor, double rouge, double cider) {
    return bleu4 + meteor + rouge + cider;
}

MetricReport report(const std::vector<TokenList>& candidates,
                    const std::vector<std::vector<TokenList>>& references,
                    const std::vector<EmotionGroundTruth>& truth, const EmotionLexicon& lexicon,
                    double gamma) {
    MetricReport r;
    r.bleu1 = 100.0 * bleu(candidates, references, 1);
    r.bleu2 = 100.0 * bleu(candidates, references, 2);
    r.bleu3 = 100.0 * bleu(candidates, references, 3);
    r.bleu4 = 100.0 * bleu(candidates, references, 4);
    r.meteor = 100.0 * meteor_corpus(candidates, references);
    r.rouge_l = 100.0 * rouge_l_corpus(candidates, references);
    auto c = cider(candidates, references);
    r.cider = 10.0 * c.score; // x10 internal scale onto the 0-100 report scale
    r.cider_degenerate = c.degenerate;
    r.sum = sum_metric(r.bleu4, r.meteor, r.rouge_l, r.cider);
    r.acc_sw = 100.0 * acc_sw(candidates, truth, lexicon);
    r.acc_c = 100.0 * acc_c(candidates, truth, lexicon);
    r.bfs = holistic_blend(r.bleu4, r.acc_c, gamma);
    r.cfs = holistic_blend(r.cider, r.acc_c, gamma);
    return r;
}

namespace {

void append_kv(std::string& out, const char* key, double v, bool last = false) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "\"%s\": %.4f", key, v);
    out += buf;
    if (!last) out += ", ";
}

} // namespace

std::string MetricReport::to_json() const {
    std::string out = "{";
    append_kv(out, "bleu1", bleu1);
    append_kv(out, "bleu2", bleu2);
    append_kv(out, "bleu3", bleu3);
    append_kv(out, "bleu4", bleu4);
    append_kv(out, "meteor", meteor);
    append_kv(out, "rouge_l", rouge_l);
    append_kv(out, "cider", cider);
    append_kv(out, "sum", sum);
    append_kv(out, "acc_sw", acc_sw);
    append_kv(out, "acc_c", acc_c);
    append_kv(out, "bfs", bfs);
    append_kv(out, "cfs", cfs, true);
    out += "}";
    return out;
}

std::string MetricReport::csv_header() {
    return "bleu1,bleu2,bleu3,bleu4,meteor,rouge_l,cider,sum,acc_sw,acc_c,bfs,cfs";
}

std::string MetricReport::to_csv_row() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f", bleu1, bleu2,
                  bleu3, bleu4, meteor, rouge_l, cider, sum, acc_sw, acc_c, bfs, cfs);
    return buf;
}

} // namespace spectrum::metrics
