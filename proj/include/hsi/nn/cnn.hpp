#pragma once

// Two "typical layers" (convolution, ReLU, 2x2 max pooling) followed by
// three dense layers:
//   conv1 -> relu -> pool -> conv2 -> relu -> pool -> flatten
//   -> fc1 -> relu -> fc2 -> relu -> fc3 -> softmax

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hsi/image.hpp"
#include "hsi/nn/layers.hpp"
#include "hsi/nn/params.hpp"

namespace hsi::nn {

struct CnnShape {
    std::size_t input_size = 64;
    std::size_t conv1_kernel = 5;
    std::size_t conv1_channels = 8;
    std::size_t conv2_kernel = 5;
    std::size_t conv2_channels = 16;
    std::size_t fc1 = 128;
    std::size_t fc2 = 64;
    std::size_t classes = 2;

    /// Spatial size after both conv/pool stages; throws ShapeError if the
    /// input is too small for the kernels.
    std::size_t final_spatial() const;
    std::size_t flat_features() const;

    friend bool operator==(const CnnShape&, const CnnShape&) = default;
};

/// Every intermediate of one forward pass.
struct CnnTrace {
    FeatureMap input;
    FeatureMap conv1_pre;
    FeatureMap conv1_act;
    PoolResult pool1;
    FeatureMap conv2_pre;
    FeatureMap conv2_act;
    PoolResult pool2;
    std::vector<double> fc1_pre, fc1_act;
    std::vector<double> fc2_pre, fc2_act;
    std::vector<double> logits;
};

class CnnModel {
public:
    using Shape = CnnShape;

    CnnModel(CnnShape shape, ParamSet params);

    static CnnModel initialize(const CnnShape& shape, std::uint64_t seed);
    static ParamSet layout(const CnnShape& shape);

    const CnnShape& shape() const noexcept { return shape_; }
    const ParamSet& params() const noexcept { return params_; }
    ParamSet& params() noexcept { return params_; }

    ConvWeights conv1() const;
    ConvWeights conv2() const;

    CnnTrace trace(const Image& image) const;
    std::vector<double> logits(const Image& image) const;
    std::vector<double> predict(const Image& image) const;

    double loss_and_gradient(std::span<const Image* const> batch, std::span<const int> labels,
                             ParamSet& grad) const;

private:
    CnnShape shape_;
    ParamSet params_;
};

std::vector<double> cnn_forward(const Image& image, const CnnModel& model);

}  // namespace hsi::nn
