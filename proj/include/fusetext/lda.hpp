#pragma once

// Latent Dirichlet allocation fitted by collapsed Gibbs sampling.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "fusetext/errors.hpp"
#include "fusetext/random.hpp"
#include "fusetext/tensor.hpp"

namespace fusetext::lda {

struct LdaParams {
    std::size_t topics = 8;
    double alpha = 0.1;
    double beta = 0.01;
    std::size_t iterations = 200;
};

struct LdaModel {
    std::size_t topics = 0;
    double alpha = 0.0;
    double beta = 0.0;
    std::vector<std::string> words;                   // index -> word
    std::unordered_map<std::string, std::size_t> vocab;  // word -> index
    Tensor phi;                                       // topics x V

    std::size_t vocab_size() const { return words.size(); }
};

struct LdaFit {
    LdaModel model;
    // Smoothed per-document topic proportions from the final sample.
    std::vector<std::vector<double>> doc_theta;
    // (iteration, log p(w, z)) pairs, recorded every `trace_every` sweeps.
    std::vector<std::pair<std::size_t, double>> log_likelihood;
};

namespace detail {

struct CountState {
    std::size_t topics;
    std::size_t vocab;
    std::vector<std::vector<std::size_t>> doc_words;
    std::vector<std::vector<std::size_t>> assignments;
    std::vector<std::vector<std::size_t>> doc_topic;  // D x K
    std::vector<std::size_t> topic_word;              // K x V, row-major
    std::vector<std::size_t> topic_total;             // K
};

// Collapsed joint log p(w, z) under symmetric Dirichlet priors.
inline double joint_log_likelihood(const CountState& s, double alpha, double beta) {
    const double K = static_cast<double>(s.topics);
    const double V = static_cast<double>(s.vocab);
    double ll = 0.0;
    ll += K * (std::lgamma(V * beta) - V * std::lgamma(beta));
    for (std::size_t k = 0; k < s.topics; ++k) {
        for (std::size_t w = 0; w < s.vocab; ++w)
            ll += std::lgamma(static_cast<double>(s.topic_word[k * s.vocab + w]) + beta);
        ll -= std::lgamma(static_cast<double>(s.topic_total[k]) + V * beta);
    }
    for (std::size_t d = 0; d < s.doc_words.size(); ++d) {
        ll += std::lgamma(K * alpha) - K * std::lgamma(alpha);
        for (std::size_t k = 0; k < s.topics; ++k)
            ll += std::lgamma(static_cast<double>(s.doc_topic[d][k]) + alpha);
        ll -= std::lgamma(static_cast<double>(s.doc_words[d].size()) + K * alpha);
    }
    return ll;
}

}  // namespace detail

// `trace_every` = 0 disables likelihood tracing.
inline LdaFit lda_fit(const std::vector<std::vector<std::string>>& corpus, const LdaParams& params,
                      std::uint64_t seed, std::size_t trace_every = 0) {
    if (params.topics < 2) throw ContractError("lda_fit: need at least 2 topics");
    if (corpus.empty()) throw ContractError("lda_fit: empty corpus");
    if (params.iterations < 1) throw ContractError("lda_fit: need at least one iteration");
    if (!(params.alpha > 0.0) || !(params.beta > 0.0)) throw ContractError("lda_fit: priors must be positive");

    LdaFit fit;
    LdaModel& model = fit.model;
    model.topics = params.topics;
    model.alpha = params.alpha;
    model.beta = params.beta;

    detail::CountState s;
    s.topics = params.topics;
    for (const auto& doc : corpus) {
        std::vector<std::size_t> ids;
        ids.reserve(doc.size());
        for (const auto& word : doc) {
            auto [it, fresh] = model.vocab.emplace(word, model.words.size());
            if (fresh) model.words.push_back(word);
            ids.push_back(it->second);
        }
        s.doc_words.push_back(std::move(ids));
    }
    s.vocab = model.words.size();
    if (s.vocab == 0) throw ContractError("lda_fit: empty vocabulary");

    const std::size_t K = s.topics, V = s.vocab;
    s.doc_topic.assign(corpus.size(), std::vector<std::size_t>(K, 0));
    s.topic_word.assign(K * V, 0);
    s.topic_total.assign(K, 0);
    s.assignments.resize(corpus.size());

    Rng rng(seed);
    for (std::size_t d = 0; d < s.doc_words.size(); ++d) {
        for (std::size_t w : s.doc_words[d]) {
            const std::size_t z = uniform_index(rng, K);
            s.assignments[d].push_back(z);
            ++s.doc_topic[d][z];
            ++s.topic_word[z * V + w];
            ++s.topic_total[z];
        }
    }
    if (trace_every) fit.log_likelihood.emplace_back(0, detail::joint_log_likelihood(s, params.alpha, params.beta));

    const double vbeta = static_cast<double>(V) * params.beta;
    std::vector<double> weights(K);
    for (std::size_t it = 1; it <= params.iterations; ++it) {
        for (std::size_t d = 0; d < s.doc_words.size(); ++d) {
            auto& doc = s.doc_words[d];
            auto& z_doc = s.assignments[d];
            auto& nd = s.doc_topic[d];
            for (std::size_t i = 0; i < doc.size(); ++i) {
                const std::size_t w = doc[i];
                std::size_t z = z_doc[i];
                --nd[z];
                --s.topic_word[z * V + w];
                --s.topic_total[z];
                double total = 0.0;
                for (std::size_t k = 0; k < K; ++k) {
                    weights[k] = (static_cast<double>(nd[k]) + params.alpha) *
                                 (static_cast<double>(s.topic_word[k * V + w]) + params.beta) /
                                 (static_cast<double>(s.topic_total[k]) + vbeta);
                    total += weights[k];
                }
                z = sample_discrete(rng, weights, total);
                z_doc[i] = z;
                ++nd[z];
                ++s.topic_word[z * V + w];
                ++s.topic_total[z];
            }
        }
        if (trace_every && it % trace_every == 0)
            fit.log_likelihood.emplace_back(it, detail::joint_log_likelihood(s, params.alpha, params.beta));
    }

    model.phi = Tensor(K, V);
    for (std::size_t k = 0; k < K; ++k) {
        const double denom = static_cast<double>(s.topic_total[k]) + vbeta;
        for (std::size_t w = 0; w < V; ++w)
            model.phi(k, w) = (static_cast<double>(s.topic_word[k * V + w]) + params.beta) / denom;
    }

    const double kalpha = static_cast<double>(K) * params.alpha;
    for (std::size_t d = 0; d < s.doc_words.size(); ++d) {
        std::vector<double> theta(K);
        const double denom = static_cast<double>(s.doc_words[d].size()) + kalpha;
        for (std::size_t k = 0; k < K; ++k) theta[k] = (static_cast<double>(s.doc_topic[d][k]) + params.alpha) / denom;
        fit.doc_theta.push_back(std::move(theta));
    }
    return fit;
}

// Gibbs sampling over one document's assignments with phi fixed. Words
// unknown to the model are skipped; with no assignable words the result is
// the uniform prior mean.
inline std::vector<double> lda_infer(const std::vector<std::string>& words, const LdaModel& model,
                                     std::size_t iterations, std::uint64_t seed) {
    const std::size_t K = model.topics;
    if (K == 0 || model.phi.rows() != K) throw ContractError("lda_infer: model is not fitted");

    std::vector<std::size_t> ids;
    for (const auto& w : words)
        if (auto it = model.vocab.find(w); it != model.vocab.end()) ids.push_back(it->second);

    std::vector<std::size_t> counts(K, 0);
    std::vector<std::size_t> z(ids.size());
    Rng rng(seed);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        z[i] = uniform_index(rng, K);
        ++counts[z[i]];
    }
    std::vector<double> weights(K);
    for (std::size_t it = 0; it < iterations && !ids.empty(); ++it) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
            --counts[z[i]];
            double total = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                weights[k] = (static_cast<double>(counts[k]) + model.alpha) * model.phi(k, ids[i]);
                total += weights[k];
            }
            z[i] = sample_discrete(rng, weights, total);
            ++counts[z[i]];
        }
    }

    std::vector<double> theta(K);
    const double denom = static_cast<double>(ids.size()) + static_cast<double>(K) * model.alpha;
    for (std::size_t k = 0; k < K; ++k) theta[k] = (static_cast<double>(counts[k]) + model.alpha) / denom;
    return theta;
}

// Indices of a topic's `n` most probable words, ties broken by word index.
inline std::vector<std::size_t> top_words(const LdaModel& model, std::size_t topic, std::size_t n) {
    std::vector<std::size_t> idx(model.vocab_size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const std::size_t take = std::min(n, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          const double pa = model.phi(topic, a), pb = model.phi(topic, b);
                          return pa != pb ? pa > pb : a < b;
                      });
    idx.resize(take);
    return idx;
}

}  // namespace fusetext::lda
