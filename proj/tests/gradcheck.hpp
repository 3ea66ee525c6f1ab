#pragma once

// Central-difference gradient check over every parameter of a classifier.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "hsi/image.hpp"
#include "hsi/nn/cnn.hpp"
#include "hsi/nn/params.hpp"

struct GradCheckResult {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t checked = 0;
};

/// rel = |analytic - numeric| / max(|analytic|, |numeric|, floor). The floor
/// keeps entries that are zero in both from dividing by zero.
template <class M>
GradCheckResult gradient_check(M model, std::span<const hsi::Image* const> batch, std::span<const int> labels,
                               double h = 1e-5, double floor = 1e-7) {
    hsi::nn::ParamSet analytic = model.params().zeros_like();
    model.loss_and_gradient(batch, labels, analytic);
    hsi::nn::ParamSet scratch = analytic.zeros_like();
    GradCheckResult out;
    for (std::size_t t = 0; t < model.params().tensors().size(); ++t) {
        auto& values = model.params().tensors()[t].values;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + h;
            const double up = model.loss_and_gradient(batch, labels, scratch);
            values[i] = saved - h;
            const double down = model.loss_and_gradient(batch, labels, scratch);
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic.tensors()[t].values[i];
            const double abs_err = std::abs(a - numeric);
            const double denom = std::max({std::abs(a), std::abs(numeric), floor});
            out.max_abs_error = std::max(out.max_abs_error, abs_err);
            out.max_rel_error = std::max(out.max_rel_error, abs_err / denom);
            ++out.checked;
        }
    }
    return out;
}

/// Smallest distance of the batch's forward pass from a point where the CNN
/// loss is not differentiable: a ReLU pre-activation at 0 or a tie for the
/// maximum of a 2x2 pooling window. Central differences are only meaningful
/// when every parameter step of size h stays well inside this margin.
inline double cnn_kink_margin(const hsi::nn::CnnModel& model, std::span<const hsi::Image* const> batch) {
    double margin = INFINITY;
    auto pre = [&](const std::vector<double>& v) {
        for (double x : v) margin = std::min(margin, std::abs(x));
    };
    auto pool_gap = [&](const hsi::nn::FeatureMap& act) {
        for (std::size_t y = 0; y + 1 < act.height; y += 2)
            for (std::size_t x = 0; x + 1 < act.width; x += 2)
                for (std::size_t c = 0; c < act.channels; ++c) {
                    double w[4] = {act(y, x, c), act(y, x + 1, c), act(y + 1, x, c), act(y + 1, x + 1, c)};
                    std::sort(w, w + 4);
                    if (w[3] > 0.0) margin = std::min(margin, w[3] - w[2]);
                }
    };
    for (const hsi::Image* img : batch) {
        const hsi::nn::CnnTrace t = model.trace(*img);
        pre(t.conv1_pre.data);
        pre(t.conv2_pre.data);
        pre(t.fc1_pre);
        pre(t.fc2_pre);
        pool_gap(t.conv1_act);
        pool_gap(t.conv2_act);
    }
    return margin;
}
