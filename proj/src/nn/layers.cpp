#include "hsi/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hsi/error.hpp"
#include "hsi/simd/kernels.hpp"

namespace hsi::nn {

FeatureMap FeatureMap::from_image(const Image& image) {
    FeatureMap fm;
    fm.height = image.rows;
    fm.width = image.cols;
    fm.channels = 1;
    fm.data = image.pixels;
    return fm;
}

namespace {

void check_conv(const FeatureMap& input, const ConvWeights& w) {
    if (input.channels != w.in_channels) {
        throw ShapeError("conv2d: input has " + std::to_string(input.channels) + " channels, kernel expects " +
                         std::to_string(w.in_channels));
    }
    if (w.kernel == 0 || w.kernel > input.height || w.kernel > input.width) {
        throw ShapeError("conv2d: kernel " + std::to_string(w.kernel) + " larger than input " +
                         std::to_string(input.height) + "x" + std::to_string(input.width));
    }
    if (w.kernels.size() != w.kernel * w.kernel * w.in_channels * w.out_channels ||
        w.bias.size() != w.out_channels) {
        throw ShapeError("conv2d: kernel/bias sizes do not match the declared shape");
    }
}

}  // namespace

FeatureMap conv2d_forward(const FeatureMap& input, const ConvWeights& w, Activation activation) {
    check_conv(input, w);
    const std::size_t oh = input.height - w.kernel + 1;
    const std::size_t ow = input.width - w.kernel + 1;
    const std::size_t seg = w.kernel * w.in_channels;  // contiguous input run per kernel row
    const std::size_t block = seg * w.out_channels;
    FeatureMap out(oh, ow, w.out_channels);
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            std::span<double> px(out.data.data() + (y * ow + x) * w.out_channels, w.out_channels);
            std::copy(w.bias.begin(), w.bias.end(), px.begin());
            for (std::size_t ky = 0; ky < w.kernel; ++ky) {
                const double* in = input.data.data() + ((y + ky) * input.width + x) * input.channels;
                simd::gemv_t(w.kernels.subspan(ky * block, block), seg, w.out_channels, {in, seg}, px);
            }
        }
    }
    if (activation == Activation::relu) relu_inplace(out.data);
    return out;
}

void conv2d_backward(const FeatureMap& input, const ConvWeights& w, const FeatureMap& d_output,
                     std::span<double> d_kernels, std::span<double> d_bias, FeatureMap* d_input) {
    check_conv(input, w);
    const std::size_t oh = input.height - w.kernel + 1;
    const std::size_t ow = input.width - w.kernel + 1;
    if (d_output.height != oh || d_output.width != ow || d_output.channels != w.out_channels) {
        throw ShapeError("conv2d_backward: output gradient shape mismatch");
    }
    const std::size_t seg = w.kernel * w.in_channels;
    const std::size_t block = seg * w.out_channels;
    if (d_input != nullptr) *d_input = FeatureMap(input.height, input.width, input.channels);
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            std::span<const double> g(d_output.data.data() + (y * ow + x) * w.out_channels, w.out_channels);
            for (std::size_t c = 0; c < w.out_channels; ++c) d_bias[c] += g[c];
            for (std::size_t ky = 0; ky < w.kernel; ++ky) {
                const std::size_t offset = ((y + ky) * input.width + x) * input.channels;
                simd::ger(d_kernels.subspan(ky * block, block), seg, w.out_channels,
                          {input.data.data() + offset, seg}, g);
                if (d_input != nullptr) {
                    simd::gemv(w.kernels.subspan(ky * block, block), seg, w.out_channels, g,
                               {d_input->data.data() + offset, seg});
                }
            }
        }
    }
}

PoolResult maxpool2(const FeatureMap& input) {
    if (input.height < 2 || input.width < 2) throw ShapeError("maxpool2: input smaller than 2x2");
    PoolResult r;
    r.output = FeatureMap(input.height / 2, input.width / 2, input.channels);
    r.argmax.resize(r.output.data.size());
    const std::size_t C = input.channels;
    for (std::size_t y = 0; y < r.output.height; ++y) {
        for (std::size_t x = 0; x < r.output.width; ++x) {
            for (std::size_t c = 0; c < C; ++c) {
                std::size_t best = ((2 * y) * input.width + 2 * x) * C + c;
                const std::size_t candidates[3] = {((2 * y) * input.width + 2 * x + 1) * C + c,
                                                   ((2 * y + 1) * input.width + 2 * x) * C + c,
                                                   ((2 * y + 1) * input.width + 2 * x + 1) * C + c};
                for (std::size_t idx : candidates)
                    if (input.data[idx] > input.data[best]) best = idx;
                const std::size_t o = (y * r.output.width + x) * C + c;
                r.output.data[o] = input.data[best];
                r.argmax[o] = static_cast<std::uint32_t>(best);
            }
        }
    }
    return r;
}

void maxpool2_backward(const PoolResult& pooled, const FeatureMap& d_output, FeatureMap& d_input) {
    if (d_output.data.size() != pooled.argmax.size()) throw ShapeError("maxpool2_backward: shape mismatch");
    for (std::size_t o = 0; o < pooled.argmax.size(); ++o) d_input.data[pooled.argmax[o]] += d_output.data[o];
}

void relu_inplace(std::span<double> values) {
    for (double& v : values) v = v > 0.0 ? v : 0.0;
}

void relu_backward(std::span<const double> pre_activation, std::span<double> grad) {
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!(pre_activation[i] > 0.0)) grad[i] = 0.0;
}

std::vector<double> dense_forward(std::span<const double> weights, std::span<const double> bias,
                                  std::span<const double> x) {
    if (bias.empty() || weights.size() != bias.size() * x.size()) {
        throw ShapeError("dense: weight shape does not match input/bias");
    }
    std::vector<double> y(bias.begin(), bias.end());
    simd::gemv(weights, bias.size(), x.size(), x, y);
    return y;
}

void dense_backward(std::span<const double> weights, std::span<const double> x, std::span<const double> dy,
                    std::span<double> d_weights, std::span<double> d_bias, std::span<double> dx) {
    const std::size_t out = dy.size();
    const std::size_t in = x.size();
    simd::ger(d_weights, out, in, dy, x);
    for (std::size_t i = 0; i < out; ++i) d_bias[i] += dy[i];
    if (!dx.empty()) {
        std::fill(dx.begin(), dx.end(), 0.0);
        simd::gemv_t(weights, out, in, dy, dx);
    }
}

std::vector<double> softmax(std::span<const double> logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

double cross_entropy_from_logits(std::span<const double> logits, int label, double smoothing) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - m);
    const double lse = m + std::log(sum);
    if (smoothing == 0.0) return lse - logits[static_cast<std::size_t>(label)];
    const double off = smoothing / static_cast<double>(logits.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double q = (static_cast<int>(i) == label ? 1.0 - smoothing : 0.0) + off;
        loss += q * (lse - logits[i]);
    }
    return loss;
}

void cross_entropy_grad(std::span<const double> logits, int label, double scale, std::span<double> d_logits,
                        double smoothing) {
    const auto p = softmax(logits);
    const double off = smoothing / static_cast<double>(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double q = (static_cast<int>(i) == label ? 1.0 - smoothing : 0.0) + off;
        d_logits[i] = scale * (p[i] - q);
    }
}

}  // namespace hsi::nn
