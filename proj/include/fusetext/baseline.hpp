#pragma once

// TF-IDF features into multinomial logistic regression, trained by full-batch
// gradient descent.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fusetext/dataset.hpp"
#include "fusetext/metrics.hpp"
#include "fusetext/random.hpp"
#include "fusetext/text.hpp"

namespace fusetext::baseline {

using SparseRow = std::vector<std::pair<std::size_t, double>>;

struct TfidfVectorizer {
    std::unordered_map<std::string, std::size_t> vocab;
    std::vector<double> idf;

    std::size_t size() const { return idf.size(); }

    // idf = ln((1 + N) / (1 + df)) + 1 over the fitted documents.
    static TfidfVectorizer fit(const std::vector<std::vector<std::string>>& docs) {
        TfidfVectorizer v;
        std::vector<std::size_t> df;
        for (const auto& doc : docs) {
            std::map<std::size_t, bool> seen;
            for (const auto& w : doc) {
                auto [it, fresh] = v.vocab.emplace(w, df.size());
                if (fresh) df.push_back(0);
                if (!seen[it->second]) {
                    seen[it->second] = true;
                    ++df[it->second];
                }
            }
        }
        if (df.empty()) throw ContractError("tfidf: empty vocabulary");
        const double n = static_cast<double>(docs.size());
        v.idf.resize(df.size());
        for (std::size_t i = 0; i < df.size(); ++i)
            v.idf[i] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[i]))) + 1.0;
        return v;
    }

    // Raw counts times idf, L2-normalized; unknown words are dropped.
    SparseRow transform(const std::vector<std::string>& doc) const {
        std::map<std::size_t, double> counts;
        for (const auto& w : doc)
            if (auto it = vocab.find(w); it != vocab.end()) counts[it->second] += 1.0;
        SparseRow row;
        double norm = 0.0;
        for (const auto& [idx, tf] : counts) {
            const double v = tf * idf[idx];
            row.emplace_back(idx, v);
            norm += v * v;
        }
        if (norm > 0.0) {
            norm = std::sqrt(norm);
            for (auto& [idx, v] : row) v /= norm;
        }
        return row;
    }
};

struct LogRegConfig {
    std::size_t iterations = 500;
    double learning_rate = 2.0;
    double l2 = 1e-4;
};

class LogisticRegression {
public:
    LogisticRegression(std::size_t classes, std::size_t features, std::uint64_t seed)
        : classes_(classes), features_(features), w_(classes * features), b_(classes, 0.0) {
        Rng rng(seed);
        for (double& v : w_) v = uniform(rng, -0.01, 0.01);
    }

    std::vector<double> logits(const SparseRow& x) const {
        std::vector<double> z = b_;
        for (std::size_t c = 0; c < classes_; ++c)
            for (const auto& [j, v] : x) z[c] += w_[c * features_ + j] * v;
        return z;
    }

    std::size_t predict(const SparseRow& x) const {
        const auto z = logits(x);
        std::size_t best = 0;
        for (std::size_t c = 1; c < z.size(); ++c)
            if (z[c] > z[best]) best = c;
        return best;
    }

    void fit(const std::vector<SparseRow>& xs, const std::vector<std::size_t>& ys, const LogRegConfig& cfg) {
        const double inv_n = 1.0 / static_cast<double>(xs.size());
        std::vector<double> gw(w_.size()), gb(classes_);
        for (std::size_t it = 0; it < cfg.iterations; ++it) {
            std::fill(gw.begin(), gw.end(), 0.0);
            std::fill(gb.begin(), gb.end(), 0.0);
            for (std::size_t i = 0; i < xs.size(); ++i) {
                auto z = logits(xs[i]);
                const double mx = *std::max_element(z.begin(), z.end());
                double s = 0.0;
                for (double& v : z) s += (v = std::exp(v - mx));
                for (std::size_t c = 0; c < classes_; ++c) {
                    const double err = (z[c] / s - (ys[i] == c ? 1.0 : 0.0)) * inv_n;
                    gb[c] += err;
                    for (const auto& [j, v] : xs[i]) gw[c * features_ + j] += err * v;
                }
            }
            for (std::size_t k = 0; k < w_.size(); ++k) w_[k] -= cfg.learning_rate * (gw[k] + cfg.l2 * w_[k]);
            for (std::size_t c = 0; c < classes_; ++c) b_[c] -= cfg.learning_rate * gb[c];
        }
    }

private:
    std::size_t classes_;
    std::size_t features_;
    std::vector<double> w_;
    std::vector<double> b_;
};

inline metrics::MetricsReport tfidf_lr_baseline(const std::vector<data::LabeledExample>& train_set,
                                                const std::vector<data::LabeledExample>& test_set,
                                                const std::vector<std::string>& class_names, std::uint64_t seed,
                                                const LogRegConfig& cfg = {}) {
    if (train_set.empty() || test_set.empty()) throw ContractError("tfidf_lr_baseline: empty split");
    auto tokenize = [](const std::vector<data::LabeledExample>& set) {
        std::vector<std::vector<std::string>> docs;
        for (const auto& e : set) docs.push_back(text::normalize_and_tokenize(e.text));
        return docs;
    };
    const auto train_docs = tokenize(train_set);
    const auto vectorizer = TfidfVectorizer::fit(train_docs);
    std::vector<SparseRow> xs;
    std::vector<std::size_t> ys;
    for (std::size_t i = 0; i < train_docs.size(); ++i) {
        xs.push_back(vectorizer.transform(train_docs[i]));
        ys.push_back(train_set[i].class_label);
    }
    LogisticRegression model(class_names.size(), vectorizer.size(), seed);
    model.fit(xs, ys, cfg);

    std::vector<std::size_t> preds, gold;
    for (const auto& doc_and_label : test_set) {
        preds.push_back(model.predict(vectorizer.transform(text::normalize_and_tokenize(doc_and_label.text))));
        gold.push_back(doc_and_label.class_label);
    }
    return metrics::build_report(preds, gold, class_names);
}

}  // namespace fusetext::baseline
