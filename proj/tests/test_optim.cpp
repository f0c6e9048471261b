#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fusetext/optim.hpp"
#include "fusetext/random.hpp"

using namespace fusetext;
using namespace fusetext::optim;

namespace {

// Scalar Adam written out per coordinate.
struct ReferenceAdam {
    std::vector<double> m, v;
    int t = 0;

    void step(std::vector<double>& x, const std::vector<double>& g, double lr) {
        if (m.empty()) m.assign(x.size(), 0.0), v.assign(x.size(), 0.0);
        ++t;
        for (std::size_t i = 0; i < x.size(); ++i) {
            m[i] = 0.9 * m[i] + 0.1 * g[i];
            v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
            const double mh = m[i] / (1.0 - std::pow(0.9, t));
            const double vh = v[i] / (1.0 - std::pow(0.999, t));
            x[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
        }
    }
};

}  // namespace

TEST(Adam, ZeroGradientLeavesParameters) {
    ParamStore p{{"w", Tensor::from_rows({{1.5, -2.0}})}};
    AdamState s;
    for (int i = 0; i < 5; ++i) adam_step(p, {{"w", Tensor(1, 2)}}, s, 0.1);
    EXPECT_EQ(p.at("w"), Tensor::from_rows({{1.5, -2.0}}));
    EXPECT_EQ(s.step, 5u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    ParamStore p{{"w", Tensor(2, 3, 0.5)}};
    AdamState s;
    adam_step(p, {{"w", Tensor(2, 3, 1.0)}}, s, 0.01);
    for (double v : p.at("w").data()) EXPECT_NEAR(v, 0.5 - 0.01, 1e-9);
}

TEST(Adam, MatchesReferenceOnQuadratic) {
    Rng rng(3);
    const std::size_t n = 7;
    std::vector<double> target(n), x(n);
    for (std::size_t i = 0; i < n; ++i) target[i] = uniform(rng, -2, 2), x[i] = uniform(rng, -2, 2);
    ParamStore p{{"x", Tensor(1, n, x)}};
    AdamState s;
    ReferenceAdam ref;
    for (int step = 0; step < 100; ++step) {
        std::vector<double> g(n);
        Tensor gt(1, n);
        for (std::size_t i = 0; i < n; ++i) {
            g[i] = 2.0 * (x[i] - target[i]);
            gt[i] = 2.0 * (p.at("x")[i] - target[i]);
        }
        ref.step(x, g, 0.05);
        adam_step(p, {{"x", gt}}, s, 0.05);
    }
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(p.at("x")[i], x[i], 1e-10);
}

TEST(Adam, OnlyParametersWithGradientsMove) {
    ParamStore p{{"a", Tensor(1, 1, 1.0)}, {"b", Tensor(1, 1, 1.0)}};
    AdamState s;
    adam_step(p, {{"a", Tensor(1, 1, 1.0)}}, s, 0.1);
    EXPECT_NE(p.at("a")[0], 1.0);
    EXPECT_EQ(p.at("b")[0], 1.0);
}

TEST(Adam, Errors) {
    ParamStore p{{"w", Tensor(2, 2)}};
    AdamState s1, s2;
    EXPECT_THROW(adam_step(p, {{"w", Tensor(2, 3)}}, s1, 0.1), ShapeError);
    EXPECT_THROW(adam_step(p, {{"missing", Tensor(1, 1)}}, s2, 0.1), ContractError);
}
