#pragma once

// Layer primitives with explicit forward/backward passes. Feature maps are
// channel-last (H x W x C); convolution kernels are k x k x C_in x C_out.

#include <cstddef>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "hsi/image.hpp"

namespace hsi::nn {

struct FeatureMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<double> data;

    FeatureMap() = default;
    FeatureMap(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
        : height(h), width(w), channels(c), data(h * w * c, fill) {}

    double& operator()(std::size_t y, std::size_t x, std::size_t ch) {
        return data[(y * width + x) * channels + ch];
    }
    double operator()(std::size_t y, std::size_t x, std::size_t ch) const {
        return data[(y * width + x) * channels + ch];
    }

    static FeatureMap from_image(const Image& image);

    friend bool operator==(const FeatureMap&, const FeatureMap&) = default;
};

enum class Activation { none, relu };

/// Non-owning view of one convolution layer's parameters.
struct ConvWeights {
    std::size_t kernel = 0;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::span<const double> kernels;  // kernel * kernel * in * out
    std::span<const double> bias;     // out
};

/// Valid cross-correlation (stride 1, no padding) plus bias, then activation.
/// Throws ShapeError when the kernel is larger than the input.
FeatureMap conv2d_forward(const FeatureMap& input, const ConvWeights& w, Activation activation);

/// Gradients of a linear (pre-activation) convolution. Accumulates into
/// d_kernels / d_bias; writes d_input when it is non-empty.
void conv2d_backward(const FeatureMap& input, const ConvWeights& w, const FeatureMap& d_output,
                     std::span<double> d_kernels, std::span<double> d_bias, FeatureMap* d_input);

struct PoolResult {
    FeatureMap output;
    std::vector<std::uint32_t> argmax;  // flat input index per output cell
};

/// Non-overlapping 2x2 max pooling; a trailing odd row/column is dropped.
/// Ties resolve to the first maximum in row-major window order.
PoolResult maxpool2(const FeatureMap& input);

void maxpool2_backward(const PoolResult& pooled, const FeatureMap& d_output, FeatureMap& d_input);

void relu_inplace(std::span<double> values);

/// Zeroes gradient entries whose pre-activation was <= 0.
void relu_backward(std::span<const double> pre_activation, std::span<double> grad);

/// y = W x + b with W row-major (out x in).
std::vector<double> dense_forward(std::span<const double> weights, std::span<const double> bias,
                                  std::span<const double> x);

/// dW += dy x^T, db += dy, dx = W^T dy (dx may be empty to skip).
void dense_backward(std::span<const double> weights, std::span<const double> x, std::span<const double> dy,
                    std::span<double> d_weights, std::span<double> d_bias, std::span<double> dx);

std::vector<double> softmax(std::span<const double> logits);

/// Cross-entropy against the target q = (1 - smoothing) * onehot(label) +
/// smoothing / classes, via log-sum-exp. smoothing = 0 gives
/// -log softmax(logits)[label].
double cross_entropy_from_logits(std::span<const double> logits, int label, double smoothing = 0.0);

/// d loss / d logits = softmax - q, scaled by `scale`.
void cross_entropy_grad(std::span<const double> logits, int label, double scale, std::span<double> d_logits,
                        double smoothing = 0.0);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace hsi::nn
