#pragma once

// Naive reference implementations used as test oracles. They are written
// independently of the library kernels: plain loops, parameters read by
// tensor name, libm activations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "hsi/band_scan.hpp"
#include "hsi/image.hpp"
#include "hsi/nn/cnn.hpp"
#include "hsi/nn/layers.hpp"
#include "hsi/nn/lstm.hpp"
#include "hsi/segmentation.hpp"

namespace oracle {

using hsi::nn::FeatureMap;

inline FeatureMap conv2d(const FeatureMap& in, const std::vector<double>& kernels, const std::vector<double>& bias,
                         std::size_t k, std::size_t cout, bool relu) {
    const std::size_t oh = in.height - k + 1, ow = in.width - k + 1;
    FeatureMap out(oh, ow, cout);
    for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x)
            for (std::size_t o = 0; o < cout; ++o) {
                double acc = bias[o];
                for (std::size_t dy = 0; dy < k; ++dy)
                    for (std::size_t dx = 0; dx < k; ++dx)
                        for (std::size_t c = 0; c < in.channels; ++c)
                            acc += in(y + dy, x + dx, c) * kernels[((dy * k + dx) * in.channels + c) * cout + o];
                out(y, x, o) = relu ? std::max(acc, 0.0) : acc;
            }
    return out;
}

inline FeatureMap maxpool2(const FeatureMap& in) {
    FeatureMap out(in.height / 2, in.width / 2, in.channels);
    for (std::size_t y = 0; y < out.height; ++y)
        for (std::size_t x = 0; x < out.width; ++x)
            for (std::size_t c = 0; c < in.channels; ++c) {
                double m = in(2 * y, 2 * x, c);
                m = std::max(m, in(2 * y, 2 * x + 1, c));
                m = std::max(m, in(2 * y + 1, 2 * x, c));
                m = std::max(m, in(2 * y + 1, 2 * x + 1, c));
                out(y, x, c) = m;
            }
    return out;
}

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Unrolled LSTM classifier probabilities, gate by gate.
inline std::vector<double> lstm_probabilities(const hsi::Image& seq, const hsi::nn::LstmModel& model) {
    const auto& shape = model.shape();
    const std::size_t H = shape.hidden_size, D = shape.input_size;
    const auto& p = model.params();
    std::vector<double> h(H, 0.0), s(H, 0.0);
    for (std::size_t t = 0; t < seq.rows; ++t) {
        std::vector<double> z(H + D);
        for (std::size_t j = 0; j < H; ++j) z[j] = h[j];
        for (std::size_t j = 0; j < D; ++j) z[H + j] = seq(t, j);
        auto pre = [&](const char* w, const char* b, std::size_t r) {
            double acc = p.at(b).values[r];
            for (std::size_t c = 0; c < H + D; ++c) acc += p.at(w).values[r * (H + D) + c] * z[c];
            return acc;
        };
        std::vector<double> hn(H), sn(H);
        for (std::size_t r = 0; r < H; ++r) {
            const double i = logistic(pre("lstm.W_i", "lstm.b_i", r));
            const double f = logistic(pre("lstm.W_f", "lstm.b_f", r));
            const double o = logistic(pre("lstm.W_o", "lstm.b_o", r));
            const double zc = pre("lstm.W_c", "lstm.b_c", r);
            const double c = shape.candidate == hsi::nn::CandidateActivation::sigmoid ? logistic(zc) : std::tanh(zc);
            sn[r] = f * s[r] + i * c;
            hn[r] = o * std::tanh(sn[r]);
        }
        h = hn;
        s = sn;
    }
    std::vector<double> logits(shape.classes);
    for (std::size_t k = 0; k < shape.classes; ++k) {
        double acc = p.at("head.b").values[k];
        for (std::size_t j = 0; j < H; ++j) acc += p.at("head.W").values[k * H + j] * h[j];
        logits[k] = acc;
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double& l : logits) z += (l = std::exp(l - m));
    for (double& l : logits) l /= z;
    return logits;
}

/// Per-sample loop over (band, seed).
inline std::vector<double> band_accuracy(const hsi::nn::CnnModel& model, const std::vector<hsi::SeedROI>& rois,
                                         const std::vector<int>& test_ids, const std::vector<std::size_t>& bands) {
    std::vector<double> out;
    for (std::size_t b : bands) {
        int correct = 0, total = 0;
        for (const auto& roi : rois) {
            if (std::find(test_ids.begin(), test_ids.end(), roi.seed_id) == test_ids.end()) continue;
            const auto probs = model.predict(roi.stack.band_image(b - 1));
            int arg = 0;
            for (std::size_t c = 1; c < probs.size(); ++c)
                if (probs[c] > probs[static_cast<std::size_t>(arg)]) arg = static_cast<int>(c);
            correct += arg == roi.class_index();
            ++total;
        }
        out.push_back(static_cast<double>(correct) / total);
    }
    return out;
}

inline std::vector<std::size_t> histogram(const hsi::Image& img, std::size_t bins, double lo, double hi) {
    std::vector<std::size_t> counts(bins, 0);
    for (double v : img.pixels) {
        if (v < lo || v > hi) continue;
        std::size_t b = bins - 1;
        for (std::size_t k = 0; k < bins; ++k) {
            const double upper = lo + (hi - lo) * static_cast<double>(k + 1) / static_cast<double>(bins);
            if (v < upper) {
                b = k;
                break;
            }
        }
        counts[b] += 1;
    }
    return counts;
}

/// Pearson via sums in long double.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const long double n = static_cast<long double>(a.size());
    long double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sa += a[i];
        sb += b[i];
    }
    const long double ma = sa / n, mb = sb / n;
    for (std::size_t i = 0; i < a.size(); ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
        sab += (a[i] - ma) * (b[i] - mb);
    }
    return static_cast<double>(sab / std::sqrt(saa * sbb));
}

/// Windowed relative-decrease scan written directly from the definition.
inline long convergence(const std::vector<long>& its, const std::vector<double>& loss, std::size_t w, double eps,
                        std::size_t patience) {
    auto mean = [&](std::size_t end) {  // window ending at index `end`, inclusive
        double s = 0.0;
        for (std::size_t i = end + 1 - w; i <= end; ++i) s += loss[i];
        return s / static_cast<double>(w);
    };
    for (std::size_t t = 0; t < loss.size(); ++t) {
        bool ok = true;
        for (std::size_t k = 0; k < patience && ok; ++k) {
            if (t < k * w + 2 * w - 1) {
                ok = false;
                break;
            }
            const std::size_t e = t - k * w;
            const double cur = mean(e), prev = mean(e - w);
            ok = (prev - cur) < eps * prev || prev == cur;
        }
        if (ok) return its[t];
    }
    return its.back();
}

inline hsi::Image random_image(std::mt19937_64& gen, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    hsi::Image img(r, c);
    for (double& v : img.pixels) v = u(gen);
    return img;
}

inline void randomize(hsi::nn::ParamSet& p, std::mt19937_64& gen, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto& t : p.tensors())
        for (double& v : t.values) v = u(gen);
}

}  // namespace oracle
