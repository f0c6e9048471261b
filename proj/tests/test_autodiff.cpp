#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "fusetext/autodiff.hpp"
#include "fusetext/random.hpp"

using namespace fusetext;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(r, c);
    for (double& v : t.data()) v = uniform(rng, lo, hi);
    return t;
}

// sum(out * W) for fixed random W, so every output coordinate carries an
// O(1) gradient.
Var weighted_sum(Tape& t, Var out, std::uint64_t seed) {
    Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
    return ad::sum(ad::mul(out, t.constant(random_tensor(out.rows(), out.cols(), rng))));
}

using UnaryBuilder = std::function<Var(Tape&, Var)>;

// Max relative error over `seeds` random inputs of shape rows x cols.
double worst_unary(const UnaryBuilder& op, std::size_t rows, std::size_t cols, int seeds, double lo = -1.0,
                   double hi = 1.0) {
    double worst = 0.0;
    for (int s = 0; s < seeds; ++s) {
        Rng rng(static_cast<std::uint64_t>(s));
        ParamStore p{{"x", random_tensor(rows, cols, rng, lo, hi)}};
        auto loss = [&](Tape& t, const ParamStore& ps) {
            return weighted_sum(t, op(t, t.parameter("x", ps.at("x"))), static_cast<std::uint64_t>(s));
        };
        worst = std::max(worst, grad_check(loss, p, 1e-5).max_rel_err);
    }
    return worst;
}

using BinaryBuilder = std::function<Var(Tape&, Var, Var)>;

double worst_binary(const BinaryBuilder& op, Shape sa, Shape sb, int seeds) {
    double worst = 0.0;
    for (int s = 0; s < seeds; ++s) {
        Rng rng(1000 + static_cast<std::uint64_t>(s));
        ParamStore p{{"a", random_tensor(sa[0], sa[1], rng)}, {"b", random_tensor(sb[0], sb[1], rng)}};
        auto loss = [&](Tape& t, const ParamStore& ps) {
            Var a = t.parameter("a", ps.at("a")), b = t.parameter("b", ps.at("b"));
            return weighted_sum(t, op(t, a, b), static_cast<std::uint64_t>(s));
        };
        worst = std::max(worst, grad_check(loss, p, 1e-5).max_rel_err);
    }
    return worst;
}

constexpr int kSeeds = 100;
constexpr double kOpTol = 1e-6;

}  // namespace

TEST(Backward, SquareAtThreeHasGradientSix) {
    Tape t;
    Var x = t.parameter("x", Tensor::scalar(3.0));
    auto g = t.backward(ad::mul(x, x));
    EXPECT_EQ(g.at("x").item(), 6.0);
}

TEST(Backward, SoftmaxCrossEntropyGradientIsPredictionMinusTarget) {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor z = random_tensor(1, 5, rng, -3, 3);
        const std::size_t cls = uniform_index(rng, 5);
        Tape t;
        Var logits = t.parameter("z", z);
        Var y_hat = ad::softmax_rows(logits);
        Tensor onehot(1, 5);
        onehot[cls] = 1.0;
        Var loss = ad::scale(ad::sum(ad::mul(t.constant(onehot), ad::log_clamped(y_hat, 1e-300, 1.0))), -1.0);
        const Tensor y = y_hat.value();
        auto g = t.backward(loss);
        for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(g.at("z")[j], y[j] - onehot[j], 1e-12);
    }
}

TEST(Backward, NonScalarOutputIsContractError) {
    Tape t;
    Var x = t.parameter("x", Tensor(2, 2, 1.0));
    EXPECT_THROW(t.backward(x), ContractError);
}

TEST(Backward, TapeIsSingleUse) {
    Tape t;
    Var x = t.parameter("x", Tensor::scalar(1.0));
    Var y = ad::mul(x, x);
    t.backward(y);
    EXPECT_TRUE(t.consumed());
    EXPECT_THROW(t.backward(y), ContractError);
}

TEST(Backward, MixingTapesIsContractError) {
    Tape a, b;
    Var x = a.parameter("x", Tensor::scalar(1.0));
    Var y = b.parameter("y", Tensor::scalar(1.0));
    EXPECT_THROW(ad::add(x, y), ContractError);
}

TEST(Backward, UnusedParameterGetsZeroGradient) {
    Tape t;
    Var x = t.parameter("x", Tensor::scalar(2.0));
    t.parameter("unused", Tensor(2, 3, 1.0));
    auto g = t.backward(ad::mul(x, x));
    EXPECT_EQ(g.at("unused"), Tensor(2, 3));
}

TEST(Backward, RepeatedBindingAccumulates) {
    Tape t;
    Var a = t.parameter("x", Tensor::scalar(2.0));
    Var b = t.parameter("x", Tensor::scalar(2.0));
    EXPECT_EQ(a.id(), b.id());
    auto g = t.backward(ad::add(ad::mul(a, a), b));
    EXPECT_EQ(g.at("x").item(), 5.0);
}

TEST(GradCheck, QuadraticIsNearlyExact) {
    Rng rng(4);
    ParamStore p{{"x", random_tensor(3, 4, rng)}};
    const Tensor a = random_tensor(3, 4, rng);
    auto loss = [&](Tape& t, const ParamStore& ps) {
        Var x = t.parameter("x", ps.at("x"));
        Var d = ad::sub(x, t.constant(a));
        return ad::sum(ad::mul(d, d));
    };
    EXPECT_LE(grad_check(loss, p, 1e-5).max_rel_err, 1e-9);
}

TEST(GradCheck, FivePointExactForQuartic) {
    ParamStore p{{"x", Tensor::from_rows({{0.75, -1.25}})}};
    auto loss = [](Tape& t, const ParamStore& ps) {
        Var x = t.parameter("x", ps.at("x"));
        Var x2 = ad::mul(x, x);
        return ad::sum(ad::mul(x2, x2));
    };
    EXPECT_LE(grad_check(loss, p, 1e-2, Stencil::five_point).max_rel_err, 1e-10);
    EXPECT_GT(grad_check(loss, p, 1e-2).max_rel_err, 1e-5);
}

// Softmax ignores a shared offset, so the offset's true gradient is zero.
TEST(GradCheck, FivePointHandlesStructuralZeros) {
    Rng rng(21);
    ParamStore p{{"x", random_tensor(1, 6, rng)}, {"c", Tensor::scalar(0.3)}};
    const Tensor w = random_tensor(1, 6, rng);
    auto loss = [&](Tape& t, const ParamStore& ps) {
        Var x = t.parameter("x", ps.at("x"));
        Var c = t.parameter("c", ps.at("c"));
        Var s = ad::softmax_rows(ad::add(x, ad::matmul(c, t.constant(Tensor(1, 6, 1.0)))));
        return ad::sum(ad::mul(s, t.constant(w)));
    };
    const auto r = grad_check(loss, p, 4e-3, Stencil::five_point);
    EXPECT_LE(r.max_rel_err, 1e-4);
}

TEST(GradCheck, NoParametersGivesEmptyReport) {
    auto loss = [](Tape& t, const ParamStore&) { return t.constant(Tensor::scalar(1.0)); };
    const auto r = grad_check(loss, {}, 1e-5);
    EXPECT_TRUE(r.per_parameter.empty());
    EXPECT_EQ(r.max_rel_err, 0.0);
}

TEST(GradCheck, NonFiniteLossIsContractError) {
    ParamStore p{{"x", Tensor::scalar(0.0)}};
    auto loss = [](Tape& t, const ParamStore& ps) {
        Var x = t.parameter("x", ps.at("x"));
        return ad::add_scalar(x, std::numeric_limits<double>::infinity());
    };
    EXPECT_THROW(grad_check(loss, p, 1e-5), ContractError);
}

TEST(GradCheck, DetectsAWrongGradient) {
    ParamStore p{{"x", Tensor::scalar(1.5)}};
    auto loss = [](Tape& t, const ParamStore& ps) {
        Var x = t.parameter("x", ps.at("x"));
        // Forward x^2 with a backward that claims 3x.
        Tensor v = Tensor::scalar(x.value().item() * x.value().item());
        return t.record(std::move(v), {x}, [x](Tape& tp, std::size_t self) {
            tp.grad(x.id())[0] += tp.grad(self)[0] * 3.0 * x.value().item();
        });
    };
    const auto r = grad_check(loss, p, 1e-5);
    EXPECT_NEAR(r.max_rel_err, 1.0 / 3.0, 1e-6);
    EXPECT_EQ(r.per_parameter.at(0).name, "x");
}

TEST(GradCheck, TwoLayerNetworkWithinTolerance) {
    Rng rng(21);
    ParamStore p{{"w1", random_tensor(4, 6, rng)}, {"b1", random_tensor(1, 6, rng)},
                 {"w2", random_tensor(6, 3, rng)}, {"b2", random_tensor(1, 3, rng)}};
    const Tensor x = random_tensor(5, 4, rng);
    auto loss = [&](Tape& t, const ParamStore& ps) {
        auto P = [&](const char* n) { return t.parameter(n, ps.at(n)); };
        Var h = ad::gelu(ad::add_row(ad::matmul(t.constant(x), P("w1")), P("b1")));
        Var y = ad::softmax_rows(ad::add_row(ad::matmul(h, P("w2")), P("b2")));
        return ad::mean(ad::log_clamped(y, 1e-12, 1.0));
    };
    const auto r = grad_check(loss, p, 1e-5);
    EXPECT_LE(r.max_rel_err, 1e-5);
    EXPECT_EQ(r.per_parameter.size(), 4u);
}

TEST(OpGradients, Matmul) {
    EXPECT_LE(worst_binary([](Tape&, Var a, Var b) { return ad::matmul(a, b); }, {3, 4}, {4, 2}, kSeeds), kOpTol);
}

TEST(OpGradients, MatmulNT) {
    EXPECT_LE(worst_binary([](Tape&, Var a, Var b) { return ad::matmul_nt(a, b); }, {3, 4}, {5, 4}, kSeeds), kOpTol);
}

TEST(OpGradients, Transpose) {
    EXPECT_LE(worst_unary([](Tape&, Var x) { return ad::transpose(x); }, 3, 4, kSeeds), kOpTol);
}

TEST(OpGradients, AddSubMul) {
    EXPECT_LE(worst_binary([](Tape&, Var a, Var b) { return ad::add(a, b); }, {2, 3}, {2, 3}, kSeeds), kOpTol);
    EXPECT_LE(worst_binary([](Tape&, Var a, Var b) { return ad::sub(a, b); }, {2, 3}, {2, 3}, kSeeds), kOpTol);
    EXPECT_LE(worst_binary([](Tape&, Var a, Var b) { return ad::mul(a, b); }, {2, 3}, {2, 3}, kSeeds), kOpTol);
}

TEST(OpGradients, RowBroadcastOps) {
    EXPECT_LE(worst_binary([](Tape&, Var a, Var b) { return ad::add_row(a, b); }, {4, 3}, {1, 3}, kSeeds), kOpTol);
    EXPECT_LE(worst_binary([](Tape&, Var a, Var b) { return ad::mul_row(a, b); }, {4, 3}, {1, 3}, kSeeds), kOpTol);
    EXPECT_LE(worst_unary([](Tape&, Var x) { return ad::broadcast_rows(x, 4); }, 1, 3, kSeeds), kOpTol);
}

TEST(OpGradients, ScaleShiftReductions) {
    EXPECT_LE(worst_unary([](Tape&, Var x) { return ad::scale(x, -2.5); }, 2, 3, kSeeds), kOpTol);
    EXPECT_LE(worst_unary([](Tape&, Var x) { return ad::add_scalar(x, 0.75); }, 2, 3, kSeeds), kOpTol);
    EXPECT_LE(worst_unary([](Tape&, Var x) { return ad::mean(x); }, 2, 3, kSeeds), kOpTol);
    EXPECT_LE(worst_unary([](Tape&, Var x) { return ad::sum(x); }, 2, 3, kSeeds), kOpTol);
}

TEST(OpGradients, Softmax) {
    EXPECT_LE(worst_unary([](Tape&, Var x) { return ad::softmax_rows(x); }, 3, 5, kSeeds, -2, 2), kOpTol);
}

TEST(OpGradients, ConcatAndSlices) {
    EXPECT_LE(worst_binary([](Tape&, Var a, Var b) { return ad::concat_cols(a, b); }, {3, 2}, {3, 4}, kSeeds), kOpTol);
    EXPECT_LE(worst_unary([](Tape&, Var x) { return ad::slice_cols(x, 1, 3); }, 3, 5, kSeeds), kOpTol);
    EXPECT_LE(worst_unary([](Tape&, Var x) { return ad::slice_rows(x, 1, 2); }, 4, 3, kSeeds), kOpTol);
}

TEST(OpGradients, GatherAndGroupMean) {
    EXPECT_LE(worst_unary([](Tape&, Var x) { return ad::gather_rows(x, {2, 0, 2, 1}); }, 4, 3, kSeeds), kOpTol);
    EXPECT_LE(worst_unary([](Tape&, Var x) { return ad::group_mean_rows(x, {0, 0, 1, 2, 2, 2}, 3); }, 6, 2, kSeeds),
              kOpTol);
}

TEST(OpGradients, Nonlinearities) {
    EXPECT_LE(worst_unary([](Tape&, Var x) { return ad::gelu(x); }, 3, 4, kSeeds, -3, 3), kOpTol);
    EXPECT_LE(worst_unary([](Tape&, Var x) { return ad::sigmoid(x); }, 3, 4, kSeeds, -4, 4), kOpTol);
    EXPECT_LE(worst_unary([](Tape&, Var x) { return ad::log_clamped(x, 1e-7, 1.0); }, 3, 4, kSeeds, 0.05, 0.95),
              kOpTol);
}

TEST(OpGradients, NormalizeRows) {
    EXPECT_LE(worst_unary([](Tape&, Var x) { return ad::normalize_rows(x, 1e-12); }, 3, 6, kSeeds, -2, 2), kOpTol);
}

TEST(Ops, LogClampedHasZeroGradientOutsideRange) {
    Tape t;
    Var x = t.parameter("x", Tensor::from_rows({{1e-9, 0.5}}));
    auto g = t.backward(ad::sum(ad::log_clamped(x, 1e-7, 1.0)));
    EXPECT_EQ(g.at("x")[0], 0.0);
    EXPECT_DOUBLE_EQ(g.at("x")[1], 2.0);
}

TEST(Ops, GatherOutOfRangeIsContractError) {
    Tape t;
    Var table = t.parameter("t", Tensor(3, 2));
    EXPECT_THROW(ad::gather_rows(table, {0, 3}), ContractError);
}

TEST(Ops, GroupMeanWithEmptyGroupIsContractError) {
    Tape t;
    Var x = t.parameter("x", Tensor(3, 2));
    EXPECT_THROW(ad::group_mean_rows(x, {0, 0, 2}, 3), ContractError);
}

TEST(Ops, ShapeMismatchesAreShapeErrors) {
    Tape t;
    Var a = t.constant(Tensor(2, 3)), b = t.constant(Tensor(3, 2));
    EXPECT_THROW(ad::add(a, b), ShapeError);
    EXPECT_THROW(ad::matmul(a, a), ShapeError);
    EXPECT_THROW(ad::concat_cols(a, b), ShapeError);
}

TEST(Ops, ConstantsCarryNoGradientWork) {
    Tape t;
    Var c = ad::mul(t.constant(Tensor(2, 2, 1.0)), t.constant(Tensor(2, 2, 2.0)));
    EXPECT_FALSE(t.requires_grad(c.id()));
}

TEST(Ops, OutputsStayFiniteOnFiniteInputs) {
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        Tape t;
        Var x = t.constant(random_tensor(3, 4, rng, -500, 500));
        EXPECT_TRUE(ad::softmax_rows(x).value().all_finite());
        EXPECT_TRUE(ad::sigmoid(x).value().all_finite());
        EXPECT_TRUE(ad::gelu(x).value().all_finite());
        EXPECT_TRUE(ad::normalize_rows(x, 1e-12).value().all_finite());
    }
}
