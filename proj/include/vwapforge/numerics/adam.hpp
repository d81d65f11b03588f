#pragma once

#include <cmath>
#include <map>
#include <string>

#include "vwapforge/numerics/param_store.hpp"

namespace vwapforge {

struct AdamState {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
    double lr_floor = 0.0;
    long step = 0;
    std::map<std::string, Tensor> first_moment;
    std::map<std::string, Tensor> second_moment;

    void set_learning_rate(double lr) {
        if (!(lr > 0.0)) throw Error("adam: learning rate must be positive");
        learning_rate = std::max(lr, lr_floor);
    }
};

/// One bias-corrected Adam update over every parameter in the store.
/// Moments are created as zeros the first time a parameter is seen.
inline void adam_step(AdamState& state, ParamStore& params) {
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (auto& [name, e] : params.entries()) {
        auto [mit, m_new] = state.first_moment.try_emplace(name, e.value.shape(), 0.0);
        auto [vit, v_new] = state.second_moment.try_emplace(name, e.value.shape(), 0.0);
        Tensor& m = mit->second;
        Tensor& v = vit->second;
        for (std::size_t i = 0; i < e.value.size(); ++i) {
            const double g = e.grad[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            e.value[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

} // namespace vwapforge
