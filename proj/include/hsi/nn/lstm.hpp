#pragma once

// LSTM sequence classifier: one LSTM layer unrolled from a zero state, the
// final hidden state fed to a dense layer and softmax.
//
//   i = sig(W_i [h, x] + b_i)   f = sig(W_f [h, x] + b_f)   o = sig(W_o [h, x] + b_o)
//   s' = f * s + i * act(W_c [h, x] + b_c)                  h' = o * tanh(s')
//
// `act` is the logistic sigmoid by default; tanh is available as the
// conventional alternative. A sequence is an Image whose rows are time steps.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hsi/image.hpp"
#include "hsi/nn/params.hpp"

namespace hsi::nn {

enum class CandidateActivation { sigmoid, tanh };

struct LstmShape {
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;
    std::size_t classes = 2;
    CandidateActivation candidate = CandidateActivation::sigmoid;
    double forget_bias = 1.0;
    /// Target smoothing of the training loss; 0 is plain cross-entropy.
    double label_smoothing = 0.0;

    friend bool operator==(const LstmShape&, const LstmShape&) = default;
};

struct CellState {
    std::vector<double> h;
    std::vector<double> s;
};

class LstmModel {
public:
    using Shape = LstmShape;

    /// Builds the parameter layout and validates `params` against it.
    LstmModel(LstmShape shape, ParamSet params);

    /// Glorot-uniform weights, zero biases except the forget gate.
    static LstmModel initialize(const LstmShape& shape, std::uint64_t seed);

    /// Zero-filled parameters with the right layout.
    static ParamSet layout(const LstmShape& shape);

    const LstmShape& shape() const noexcept { return shape_; }
    const ParamSet& params() const noexcept { return params_; }
    ParamSet& params() noexcept { return params_; }

    CellState cell_forward(std::span<const double> x, std::span<const double> h_prev,
                           std::span<const double> s_prev) const;

    std::vector<double> logits(const Image& sequence) const;
    std::vector<double> predict(const Image& sequence) const;

    /// Mean cross-entropy over the batch; `grad` is overwritten with its
    /// exact gradient (backpropagation through time).
    double loss_and_gradient(std::span<const Image* const> batch, std::span<const int> labels,
                             ParamSet& grad) const;

private:
    void check_sequence(const Image& sequence) const;

    LstmShape shape_;
    ParamSet params_;
};

CellState lstm_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                            std::span<const double> s_prev, const LstmModel& model);

std::vector<double> lstm_classify_forward(const Image& sequence, const LstmModel& model);

}  // namespace hsi::nn
