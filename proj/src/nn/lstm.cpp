#include "hsi/nn/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "hsi/error.hpp"
#include "hsi/nn/layers.hpp"
#include "hsi/simd/kernels.hpp"

namespace hsi::nn {
namespace {

constexpr const char* kGateWeights[4] = {"lstm.W_i", "lstm.W_f", "lstm.W_o", "lstm.W_c"};
constexpr const char* kGateBiases[4] = {"lstm.b_i", "lstm.b_f", "lstm.b_o", "lstm.b_c"};
enum Gate { kInput = 0, kForget = 1, kOutput = 2, kCandidate = 3 };

double candidate_act(double z, CandidateActivation a) { return a == CandidateActivation::sigmoid ? sigmoid(z) : std::tanh(z); }

double candidate_deriv(double g, CandidateActivation a) {
    return a == CandidateActivation::sigmoid ? g * (1.0 - g) : 1.0 - g * g;
}

}  // namespace

ParamSet LstmModel::layout(const LstmShape& shape) {
    if (shape.input_size == 0 || shape.hidden_size == 0 || shape.classes < 2) {
        throw ShapeError("lstm: input, hidden and class counts must be positive (classes >= 2)");
    }
    const std::size_t H = shape.hidden_size;
    const std::size_t Z = H + shape.input_size;
    ParamSet p;
    for (int g = 0; g < 4; ++g) p.add(kGateWeights[g], {H, Z}, TensorKind::weight);
    for (int g = 0; g < 4; ++g) p.add(kGateBiases[g], {H}, TensorKind::bias);
    p.add("head.W", {shape.classes, H}, TensorKind::weight);
    p.add("head.b", {shape.classes}, TensorKind::bias);
    return p;
}

LstmModel::LstmModel(LstmShape shape, ParamSet params) : shape_(shape), params_(std::move(params)) {
    if (!params_.same_layout(layout(shape_))) throw ShapeError("lstm: parameter layout does not match shape");
}

LstmModel LstmModel::initialize(const LstmShape& shape, std::uint64_t seed) {
    ParamSet p = layout(shape);
    std::mt19937_64 rng(seed);
    const std::size_t H = shape.hidden_size;
    for (auto& t : p.tensors()) {
        if (t.kind != TensorKind::weight) continue;
        const double bound = glorot_bound(t.shape[1], t.shape[0]);
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& v : t.values) v = dist(rng);
    }
    auto& bf = p.at(kGateBiases[kForget]).values;
    std::fill(bf.begin(), bf.begin() + static_cast<std::ptrdiff_t>(H), shape.forget_bias);
    return LstmModel(shape, std::move(p));
}

void LstmModel::check_sequence(const Image& sequence) const {
    if (sequence.rows < 1) throw ShapeError("lstm: sequence needs at least one time step");
    if (sequence.cols != shape_.input_size) {
        throw ShapeError("lstm: sequence has " + std::to_string(sequence.cols) + " features per step, model expects " +
                         std::to_string(shape_.input_size));
    }
}

CellState LstmModel::cell_forward(std::span<const double> x, std::span<const double> h_prev,
                                  std::span<const double> s_prev) const {
    const std::size_t H = shape_.hidden_size;
    if (x.size() != shape_.input_size || h_prev.size() != H || s_prev.size() != H) {
        throw ShapeError("lstm cell: input/state dimensions do not match the parameters");
    }
    std::vector<double> xh(H + x.size());
    std::copy(h_prev.begin(), h_prev.end(), xh.begin());
    std::copy(x.begin(), x.end(), xh.begin() + static_cast<std::ptrdiff_t>(H));
    std::vector<double> z[4];
    for (int g = 0; g < 4; ++g) {
        const auto& b = params_.at(kGateBiases[g]).values;
        z[g].assign(b.begin(), b.end());
        simd::gemv(params_.at(kGateWeights[g]).values, H, xh.size(), xh, z[g]);
    }
    CellState out{std::vector<double>(H), std::vector<double>(H)};
    for (std::size_t k = 0; k < H; ++k) {
        const double i = sigmoid(z[kInput][k]);
        const double f = sigmoid(z[kForget][k]);
        const double o = sigmoid(z[kOutput][k]);
        const double c = candidate_act(z[kCandidate][k], shape_.candidate);
        out.s[k] = f * s_prev[k] + i * c;
        out.h[k] = o * std::tanh(out.s[k]);
    }
    return out;
}

std::vector<double> LstmModel::logits(const Image& sequence) const {
    check_sequence(sequence);
    const std::size_t H = shape_.hidden_size;
    CellState state{std::vector<double>(H, 0.0), std::vector<double>(H, 0.0)};
    for (std::size_t t = 0; t < sequence.rows; ++t) state = cell_forward(sequence.row(t), state.h, state.s);
    return dense_forward(params_.at("head.W").values, params_.at("head.b").values, state.h);
}

std::vector<double> LstmModel::predict(const Image& sequence) const { return softmax(logits(sequence)); }

double LstmModel::loss_and_gradient(std::span<const Image* const> batch, std::span<const int> labels,
                                    ParamSet& grad) const {
    if (batch.empty() || batch.size() != labels.size()) throw ShapeError("lstm: batch/label size mismatch");
    if (!grad.same_layout(params_)) grad = params_.zeros_like();
    grad.fill(0.0);
    for (const Image* seq : batch) check_sequence(*seq);

    const std::size_t H = shape_.hidden_size;
    const std::size_t D = shape_.input_size;
    const std::size_t Z = H + D;
    const std::size_t G = 4 * H;
    const std::size_t C = shape_.classes;
    const double scale = 1.0 / static_cast<double>(batch.size());

    // Gate weights stacked as one G x Z matrix (rows i, f, o, c) and its
    // transpose, so a time step of the whole batch is one matrix product.
    std::vector<double> w_cat(G * Z), w_cat_t(Z * G), bias(G);
    for (int g = 0; g < 4; ++g) {
        const auto& w = params_.at(kGateWeights[g]).values;
        const auto& b = params_.at(kGateBiases[g]).values;
        std::copy(w.begin(), w.end(), w_cat.begin() + static_cast<std::ptrdiff_t>(g * H * Z));
        std::copy(b.begin(), b.end(), bias.begin() + static_cast<std::ptrdiff_t>(g * H));
    }
    for (std::size_t r = 0; r < G; ++r)
        for (std::size_t z = 0; z < Z; ++z) w_cat_t[z * G + r] = w_cat[r * Z + z];
    const auto& head_w = params_.at("head.W").values;
    const auto& head_b = params_.at("head.b").values;
    auto& head_dw = grad.at("head.W").values;
    auto& head_db = grad.at("head.b").values;

    std::vector<double> dw_cat(G * Z, 0.0), db_cat(G, 0.0);
    std::vector<double> xh, act, st, tanh_st, dz, dz_t, dh, dh_prev, ds, h_last, logit, dlogit(C);
    double total = 0.0;

    // Sequences of equal length are processed together.
    std::size_t first = 0;
    while (first < batch.size()) {
        const std::size_t T = batch[first]->rows;
        std::size_t last = first + 1;
        while (last < batch.size() && batch[last]->rows == T) ++last;
        const std::size_t B = last - first;

        xh.resize(T * B * Z);
        act.resize(T * B * G);
        st.resize(T * B * H);
        tanh_st.resize(T * B * H);
        for (std::size_t t = 0; t < T; ++t) {
            double* xh_t = &xh[t * B * Z];
            double* a_t = &act[t * B * G];
            for (std::size_t n = 0; n < B; ++n) {
                double* row = xh_t + n * Z;
                if (t == 0) {
                    std::fill_n(row, H, 0.0);
                } else {
                    const double* o_prev = &act[((t - 1) * B + n) * G + kOutput * H];
                    const double* ts_prev = &tanh_st[((t - 1) * B + n) * H];
                    for (std::size_t k = 0; k < H; ++k) row[k] = o_prev[k] * ts_prev[k];
                }
                const auto x = batch[first + n]->row(t);
                std::copy(x.begin(), x.end(), row + H);
                std::copy(bias.begin(), bias.end(), a_t + n * G);
            }
            simd::gemm(B, G, Z, xh_t, Z, w_cat_t.data(), G, a_t, G);
            for (std::size_t n = 0; n < B; ++n) {
                double* a = a_t + n * G;
                simd::sigmoid_inplace({a, 3 * H});
                if (shape_.candidate == CandidateActivation::sigmoid) simd::sigmoid_inplace({a + 3 * H, H});
                else simd::tanh_inplace({a + 3 * H, H});
                double* s = &st[(t * B + n) * H];
                const double* s_prev = t > 0 ? &st[((t - 1) * B + n) * H] : nullptr;
                for (std::size_t k = 0; k < H; ++k)
                    s[k] = a[kInput * H + k] * a[kCandidate * H + k] + (s_prev ? a[kForget * H + k] * s_prev[k] : 0.0);
            }
            std::copy_n(&st[t * B * H], B * H, &tanh_st[t * B * H]);
            simd::tanh_inplace({&tanh_st[t * B * H], B * H});
        }

        // head and loss
        dh.assign(B * H, 0.0);
        h_last.resize(H);
        for (std::size_t n = 0; n < B; ++n) {
            const double* o = &act[((T - 1) * B + n) * G + kOutput * H];
            const double* ts = &tanh_st[((T - 1) * B + n) * H];
            for (std::size_t k = 0; k < H; ++k) h_last[k] = o[k] * ts[k];
            logit = dense_forward(head_w, head_b, h_last);
            const int label = labels[first + n];
            total += cross_entropy_from_logits(logit, label, shape_.label_smoothing);
            cross_entropy_grad(logit, label, scale, dlogit, shape_.label_smoothing);
            std::vector<double> dh_n(H, 0.0);
            dense_backward(head_w, h_last, dlogit, head_dw, head_db, dh_n);
            std::copy(dh_n.begin(), dh_n.end(), dh.begin() + static_cast<std::ptrdiff_t>(n * H));
        }

        // backpropagation through time
        dz.resize(T * B * G);
        ds.assign(B * H, 0.0);
        for (std::size_t t = T; t-- > 0;) {
            double* dz_step = &dz[t * B * G];
            for (std::size_t n = 0; n < B; ++n) {
                const double* a = &act[(t * B + n) * G];
                const double* ts = &tanh_st[(t * B + n) * H];
                const double* s_prev = t > 0 ? &st[((t - 1) * B + n) * H] : nullptr;
                double* d = dz_step + n * G;
                for (std::size_t k = 0; k < H; ++k) {
                    const double i = a[kInput * H + k];
                    const double f = a[kForget * H + k];
                    const double o = a[kOutput * H + k];
                    const double g = a[kCandidate * H + k];
                    const double sp = s_prev ? s_prev[k] : 0.0;
                    const double dh_k = dh[n * H + k];
                    const double d_s = ds[n * H + k] + dh_k * o * (1.0 - ts[k] * ts[k]);
                    d[kInput * H + k] = d_s * g * i * (1.0 - i);
                    d[kForget * H + k] = d_s * sp * f * (1.0 - f);
                    d[kOutput * H + k] = dh_k * ts[k] * o * (1.0 - o);
                    d[kCandidate * H + k] = d_s * i * candidate_deriv(g, shape_.candidate);
                    ds[n * H + k] = d_s * f;
                }
            }
            if (t > 0) {
                dh_prev.assign(B * H, 0.0);
                simd::gemm(B, H, G, dz_step, G, w_cat.data(), Z, dh_prev.data(), H);
                dh.swap(dh_prev);
            }
        }

        // weight gradients: dW += dZ^T [h, x] over every step and sequence
        const std::size_t R = T * B;
        dz_t.resize(G * R);
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < G; ++c) dz_t[c * R + r] = dz[r * G + c];
        constexpr std::size_t kChunk = 64;  // keeps the streamed rows of [h, x] cache-resident
        for (std::size_t r0 = 0; r0 < R; r0 += kChunk) {
            simd::gemm(G, Z, std::min(kChunk, R - r0), dz_t.data() + r0, R, xh.data() + r0 * Z, Z, dw_cat.data(), Z);
        }
        for (std::size_t c = 0; c < G; ++c) {
            double sum = 0.0;
            for (std::size_t r = 0; r < R; ++r) sum += dz_t[c * R + r];
            db_cat[c] += sum;
        }
        first = last;
    }

    for (int g = 0; g < 4; ++g) {
        auto& dw = grad.at(kGateWeights[g]).values;
        auto& db = grad.at(kGateBiases[g]).values;
        for (std::size_t i = 0; i < H * Z; ++i) dw[i] += dw_cat[g * H * Z + i];
        for (std::size_t k = 0; k < H; ++k) db[k] += db_cat[g * H + k];
    }
    return total * scale;
}

CellState lstm_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                            std::span<const double> s_prev, const LstmModel& model) {
    return model.cell_forward(x, h_prev, s_prev);
}

std::vector<double> lstm_classify_forward(const Image& sequence, const LstmModel& model) {
    return model.predict(sequence);
}

}  // namespace hsi::nn
