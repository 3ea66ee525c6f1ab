#include "hsi/nn/adam.hpp"

#include <cmath>

#include "hsi/error.hpp"

namespace hsi::nn {

AdamState AdamState::for_params(const ParamSet& params) {
    return AdamState{0, params.zeros_like(), params.zeros_like()};
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, const AdamConfig& config) {
    if (state.step < 0) throw ConfigError("adam: negative timestep");
    if (!params.same_layout(grads)) throw ShapeError("adam: gradient layout does not match parameters");
    if (!state.m.same_layout(params) || !state.v.same_layout(params)) {
        state.m = params.zeros_like();
        state.v = params.zeros_like();
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);
    auto& pt = params.tensors();
    const auto& gt = grads.tensors();
    auto& mt = state.m.tensors();
    auto& vt = state.v.tensors();
    for (std::size_t k = 0; k < pt.size(); ++k) {
        auto& p = pt[k].values;
        const auto& g = gt[k].values;
        auto& m = mt[k].values;
        auto& v = vt[k].values;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
        }
    }
}

}  // namespace hsi::nn
