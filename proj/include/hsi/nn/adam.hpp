#pragma once

#include <cstdint>

#include "hsi/nn/params.hpp"

namespace hsi::nn {

struct AdamConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::int64_t step = 0;
    ParamSet m;
    ParamSet v;

    static AdamState for_params(const ParamSet& params);
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, const AdamConfig& config);

}  // namespace hsi::nn
