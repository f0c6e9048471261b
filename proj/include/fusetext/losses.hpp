#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "fusetext/autodiff.hpp"

namespace fusetext::losses {

inline constexpr double kProbFloor = 1e-7;
inline constexpr double kProbCeil = 1.0 - 1e-7;
inline constexpr double kMinTaskWeight = 0.1;
inline constexpr double kMaxTaskWeight = 0.9;

inline double clamp_prob(double p) { return std::clamp(p, kProbFloor, kProbCeil); }

// -w * log(y_hat[true class]) for a one-hot target.
inline double ce_loss(std::span<const double> y_true, std::span<const double> y_hat, double class_weight = 1.0) {
    if (y_true.size() != y_hat.size()) throw ShapeError("ce_loss: target and prediction lengths differ");
    std::size_t hot = y_true.size();
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] == 1.0) {
            if (hot != y_true.size()) throw ContractError("ce_loss: target has more than one hot entry");
            hot = i;
        } else if (y_true[i] != 0.0) {
            throw ContractError("ce_loss: target entries must be 0 or 1");
        }
    }
    if (hot == y_true.size()) throw ContractError("ce_loss: target has no hot entry");
    return -class_weight * std::log(clamp_prob(y_hat[hot]));
}

inline double bce_loss(std::span<const double> y_true, std::span<const double> y_hat) {
    if (y_true.empty()) throw ContractError("bce_loss: empty batch");
    if (y_true.size() != y_hat.size()) throw ShapeError("bce_loss: batch lengths differ");
    double total = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double p = clamp_prob(y_hat[i]);
        total += y_true[i] * std::log(p) + (1.0 - y_true[i]) * std::log(1.0 - p);
    }
    return -total / static_cast<double>(y_true.size());
}

struct LossWeights {
    double lambda1 = 0.5;
    double lambda2 = 0.5;

    // 1 - 0.9 rounds below 0.1, hence the slack on the bounds.
    void validate() const {
        constexpr double slack = 1e-12;
        const auto in_range = [](double v) { return v >= kMinTaskWeight - slack && v <= kMaxTaskWeight + slack; };
        if (!(in_range(lambda1) && in_range(lambda2)) || !(std::abs(lambda1 + lambda2 - 1.0) <= slack)) {
            throw ValidationError("loss weights must lie in [0.1, 0.9] and sum to 1");
        }
    }
    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

inline double combined_loss(double l_ce, double l_bce, const LossWeights& w) {
    return w.lambda1 * l_ce + w.lambda2 * l_bce;
}

// The task with the larger recent loss receives the larger weight:
// lambda1 = clamp(ce / (ce + bce), 0.1, 0.9), lambda2 = 1 - lambda1.
inline LossWeights update_loss_weights(double recent_ce, double recent_bce) {
    if (!(recent_ce >= 0.0) || !(recent_bce >= 0.0))
        throw ContractError("update_loss_weights: recent losses must be nonnegative");
    const double total = recent_ce + recent_bce;
    if (total == 0.0) return {0.5, 0.5};
    const double l1 = std::clamp(recent_ce / total, kMinTaskWeight, kMaxTaskWeight);
    return {l1, 1.0 - l1};
}

// Inverse-frequency class weights N / (C * count_c); 1 for absent classes.
inline std::vector<double> inverse_frequency_weights(std::span<const std::size_t> labels, std::size_t classes) {
    std::vector<double> counts(classes, 0.0);
    for (std::size_t y : labels) counts.at(y) += 1.0;
    std::vector<double> w(classes, 1.0);
    const double n = static_cast<double>(labels.size());
    for (std::size_t c = 0; c < classes; ++c)
        if (counts[c] > 0.0) w[c] = n / (static_cast<double>(classes) * counts[c]);
    return w;
}

// Differentiable forms.

inline Var ce_loss(Var y_hat, std::size_t true_class, double class_weight = 1.0) {
    if (y_hat.rows() != 1 || true_class >= y_hat.cols()) throw ContractError("ce_loss: class index out of range");
    Var p = ad::slice_cols(y_hat, true_class, 1);
    return ad::scale(ad::log_clamped(p, kProbFloor, kProbCeil), -class_weight);
}

// Per-example binary cross-entropy; callers average over the batch.
inline Var bce_term(Var y_binary, double target) {
    Var log_p = ad::log_clamped(y_binary, kProbFloor, kProbCeil);
    Var log_q = ad::log_clamped(ad::add_scalar(ad::scale(y_binary, -1.0), 1.0), kProbFloor, kProbCeil);
    return ad::scale(ad::add(ad::scale(log_p, target), ad::scale(log_q, 1.0 - target)), -1.0);
}

inline Var combined_loss(Var l_ce, Var l_bce, const LossWeights& w) {
    return ad::add(ad::scale(l_ce, w.lambda1), ad::scale(l_bce, w.lambda2));
}

}  // namespace fusetext::losses
