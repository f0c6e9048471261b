#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "fusetext/lda.hpp"
#include "synthetic_corpus.hpp"

using namespace fusetext;
using namespace fusetext::lda;

namespace {

LdaParams two_topics(std::size_t iterations = 200) {
    LdaParams p;
    p.topics = 2;
    p.iterations = iterations;
    return p;
}

double purity(const LdaModel& m, std::size_t topic, const std::set<std::string>& source) {
    const auto top = top_words(m, topic, 5);
    double hits = 0;
    for (std::size_t i : top) hits += source.count(m.words[i]) ? 1.0 : 0.0;
    return hits / static_cast<double>(top.size());
}

}  // namespace

TEST(LdaFit, PhiRowsAreDistributions) {
    const auto corpus = synth::two_topic_corpus(40, 15, 3);
    LdaParams p;
    p.iterations = 30;
    const auto fit = lda_fit(corpus, p, 5);
    ASSERT_EQ(fit.model.phi.shape(), (Shape{8, fit.model.vocab_size()}));
    for (std::size_t k = 0; k < fit.model.topics; ++k) {
        double s = 0.0;
        for (double v : fit.model.phi.row(k)) {
            EXPECT_GT(v, 0.0);
            s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-9);
    }
    for (const auto& theta : fit.doc_theta) {
        double s = 0.0;
        for (double v : theta) s += v;
        EXPECT_NEAR(s, 1.0, 1e-9);
    }
}

TEST(LdaFit, RecoversDisjointTopics) {
    std::vector<std::string> a, b;
    const auto corpus = synth::two_topic_corpus(60, 20, 11, &a, &b);
    const auto fit = lda_fit(corpus, two_topics(), 7);
    const std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::set<bool> sources;
    for (std::size_t k = 0; k < 2; ++k) {
        const double pa = purity(fit.model, k, sa), pb = purity(fit.model, k, sb);
        EXPECT_GE(std::max(pa, pb), 0.8) << "topic " << k;
        sources.insert(pa > pb);
    }
    EXPECT_EQ(sources.size(), 2u) << "both topics collapsed onto one source";
}

TEST(LdaFit, DeterministicGivenSeed) {
    const auto corpus = synth::two_topic_corpus(30, 10, 2);
    const auto f1 = lda_fit(corpus, two_topics(50), 99);
    const auto f2 = lda_fit(corpus, two_topics(50), 99);
    EXPECT_EQ(f1.model.phi, f2.model.phi);
    EXPECT_EQ(f1.doc_theta, f2.doc_theta);
    const auto f3 = lda_fit(corpus, two_topics(50), 100);
    EXPECT_EQ(f3.model.words, f1.model.words);
}

TEST(LdaFit, LogLikelihoodNondecreasingAtCheckpoints) {
    const auto corpus = synth::two_topic_corpus(60, 20, 11);
    const auto fit = lda_fit(corpus, two_topics(500), 7, 50);
    ASSERT_EQ(fit.log_likelihood.size(), 11u);
    int decreases = 0;
    for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i)
        decreases += fit.log_likelihood[i].second < fit.log_likelihood[i - 1].second;
    EXPECT_LE(decreases, 1);
    EXPECT_GT(fit.log_likelihood.back().second, fit.log_likelihood.front().second);
}

TEST(LdaFit, Preconditions) {
    const auto corpus = synth::two_topic_corpus(4, 3, 1);
    LdaParams p = two_topics(5);
    EXPECT_THROW(lda_fit({}, p, 1), ContractError);
    EXPECT_THROW(lda_fit({{}, {}}, p, 1), ContractError);
    p.topics = 1;
    EXPECT_THROW(lda_fit(corpus, p, 1), ContractError);
    p = two_topics(0);
    EXPECT_THROW(lda_fit(corpus, p, 1), ContractError);
}

TEST(LdaInfer, UnseenWordsGiveUniformTheta) {
    const auto fit = lda_fit(synth::two_topic_corpus(10, 10, 1), two_topics(20), 1);
    const auto theta = lda_infer({"never", "seen", "words"}, fit.model, 20, 3);
    for (double v : theta) EXPECT_DOUBLE_EQ(v, 0.5);
    for (double v : lda_infer({}, fit.model, 20, 3)) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(LdaInfer, ThetaOnSimplex) {
    const auto corpus = synth::two_topic_corpus(30, 12, 4);
    LdaParams p;
    p.iterations = 40;
    const auto fit = lda_fit(corpus, p, 2);
    for (std::size_t d = 0; d < corpus.size(); ++d) {
        const auto theta = lda_infer(corpus[d], fit.model, 30, d);
        double s = 0.0;
        for (double v : theta) {
            EXPECT_GT(v, 0.0);
            s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-9);
    }
}

TEST(LdaInfer, TrainingDocumentsMatchFitTimeTheta) {
    const auto corpus = synth::two_topic_corpus(60, 20, 11);
    const auto fit = lda_fit(corpus, two_topics(), 7);
    for (std::size_t d = 0; d < corpus.size(); ++d) {
        const auto theta = lda_infer(corpus[d], fit.model, 50, 1000 + d);
        double tv = 0.0;
        for (std::size_t k = 0; k < 2; ++k) tv += std::abs(theta[k] - fit.doc_theta[d][k]);
        EXPECT_LE(tv / 2.0, 0.2) << "document " << d;
    }
}

TEST(LdaInfer, DeterministicGivenSeed) {
    const auto corpus = synth::two_topic_corpus(20, 10, 4);
    const auto fit = lda_fit(corpus, two_topics(20), 2);
    EXPECT_EQ(lda_infer(corpus[3], fit.model, 25, 8), lda_infer(corpus[3], fit.model, 25, 8));
}

TEST(LdaInfer, UnfittedModelIsContractError) {
    EXPECT_THROW(lda_infer({"a"}, LdaModel{}, 5, 1), ContractError);
}

TEST(TopWords, OrderedByProbabilityWithIndexTieBreak) {
    LdaModel m;
    m.topics = 1;
    m.words = {"a", "b", "c", "d"};
    m.phi = Tensor::from_rows({{0.1, 0.4, 0.1, 0.4}});
    EXPECT_EQ(top_words(m, 0, 3), (std::vector<std::size_t>{1, 3, 0}));
    EXPECT_EQ(top_words(m, 0, 10).size(), 4u);
}
