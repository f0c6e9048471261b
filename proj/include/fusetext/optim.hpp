#pragma once

#include <cmath>
#include <map>
#include <string>

#include "fusetext/autodiff.hpp"
#include "fusetext/tensor.hpp"

namespace fusetext::optim {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;
    std::size_t step = 0;
};

// One bias-corrected Adam update of every parameter that has a gradient.
inline void adam_step(ParamStore& params, const ParamGrads& grads, AdamState& state, double lr,
                      const AdamConfig& cfg = {}) {
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (const auto& [name, g] : grads) {
        auto it = params.find(name);
        if (it == params.end()) throw ContractError("adam_step: gradient for unknown parameter '" + name + "'");
        Tensor& p = it->second;
        if (p.shape() != g.shape()) {
            throw ShapeError("adam_step: '" + name + "' parameter " + shape_string(p.shape()) + " vs gradient " +
                             shape_string(g.shape()));
        }
        Tensor& m = state.m.try_emplace(name, p.rows(), p.cols()).first->second;
        Tensor& v = state.v.try_emplace(name, p.rows(), p.cols()).first->second;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

}  // namespace fusetext::optim
