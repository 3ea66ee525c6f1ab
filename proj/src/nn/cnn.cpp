#include "hsi/nn/cnn.hpp"

#include <random>
#include <string>

#include "hsi/error.hpp"

namespace hsi::nn {

std::size_t CnnShape::final_spatial() const {
    if (conv1_kernel == 0 || conv2_kernel == 0 || input_size < conv1_kernel) {
        throw ShapeError("cnn: input " + std::to_string(input_size) + " too small for conv1");
    }
    const std::size_t p1 = (input_size - conv1_kernel + 1) / 2;
    if (p1 < conv2_kernel) throw ShapeError("cnn: input " + std::to_string(input_size) + " too small for conv2");
    const std::size_t p2 = (p1 - conv2_kernel + 1) / 2;
    if (p2 < 1) throw ShapeError("cnn: input " + std::to_string(input_size) + " too small for the second pool");
    return p2;
}

std::size_t CnnShape::flat_features() const {
    const std::size_t s = final_spatial();
    return s * s * conv2_channels;
}

ParamSet CnnModel::layout(const CnnShape& s) {
    if (s.conv1_channels == 0 || s.conv2_channels == 0 || s.fc1 == 0 || s.fc2 == 0 || s.classes < 2) {
        throw ShapeError("cnn: layer sizes must be positive (classes >= 2)");
    }
    ParamSet p;
    p.add("conv1.kernel", {s.conv1_kernel, s.conv1_kernel, 1, s.conv1_channels}, TensorKind::weight);
    p.add("conv1.bias", {s.conv1_channels}, TensorKind::bias);
    p.add("conv2.kernel", {s.conv2_kernel, s.conv2_kernel, s.conv1_channels, s.conv2_channels}, TensorKind::weight);
    p.add("conv2.bias", {s.conv2_channels}, TensorKind::bias);
    p.add("fc1.W", {s.fc1, s.flat_features()}, TensorKind::weight);
    p.add("fc1.b", {s.fc1}, TensorKind::bias);
    p.add("fc2.W", {s.fc2, s.fc1}, TensorKind::weight);
    p.add("fc2.b", {s.fc2}, TensorKind::bias);
    p.add("fc3.W", {s.classes, s.fc2}, TensorKind::weight);
    p.add("fc3.b", {s.classes}, TensorKind::bias);
    return p;
}

CnnModel::CnnModel(CnnShape shape, ParamSet params) : shape_(shape), params_(std::move(params)) {
    if (!params_.same_layout(layout(shape_))) throw ShapeError("cnn: parameter layout does not match shape");
}

CnnModel CnnModel::initialize(const CnnShape& shape, std::uint64_t seed) {
    ParamSet p = layout(shape);
    std::mt19937_64 rng(seed);
    for (auto& t : p.tensors()) {
        if (t.kind != TensorKind::weight) continue;
        std::size_t fan_in, fan_out;
        if (t.shape.size() == 4) {  // k x k x in x out
            fan_in = t.shape[0] * t.shape[1] * t.shape[2];
            fan_out = t.shape[0] * t.shape[1] * t.shape[3];
        } else {
            fan_in = t.shape[1];
            fan_out = t.shape[0];
        }
        const double bound = glorot_bound(fan_in, fan_out);
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& v : t.values) v = dist(rng);
    }
    return CnnModel(shape, std::move(p));
}

ConvWeights CnnModel::conv1() const {
    return {shape_.conv1_kernel, 1, shape_.conv1_channels, params_.at("conv1.kernel").values,
            params_.at("conv1.bias").values};
}

ConvWeights CnnModel::conv2() const {
    return {shape_.conv2_kernel, shape_.conv1_channels, shape_.conv2_channels, params_.at("conv2.kernel").values,
            params_.at("conv2.bias").values};
}

CnnTrace CnnModel::trace(const Image& image) const {
    if (image.rows != shape_.input_size || image.cols != shape_.input_size) {
        throw ShapeError("cnn: image is " + std::to_string(image.rows) + "x" + std::to_string(image.cols) +
                         ", model expects " + std::to_string(shape_.input_size) + "x" +
                         std::to_string(shape_.input_size));
    }
    CnnTrace t;
    t.input = FeatureMap::from_image(image);
    t.conv1_pre = conv2d_forward(t.input, conv1(), Activation::none);
    t.conv1_act = t.conv1_pre;
    relu_inplace(t.conv1_act.data);
    t.pool1 = maxpool2(t.conv1_act);
    t.conv2_pre = conv2d_forward(t.pool1.output, conv2(), Activation::none);
    t.conv2_act = t.conv2_pre;
    relu_inplace(t.conv2_act.data);
    t.pool2 = maxpool2(t.conv2_act);
    t.fc1_pre = dense_forward(params_.at("fc1.W").values, params_.at("fc1.b").values, t.pool2.output.data);
    t.fc1_act = t.fc1_pre;
    relu_inplace(t.fc1_act);
    t.fc2_pre = dense_forward(params_.at("fc2.W").values, params_.at("fc2.b").values, t.fc1_act);
    t.fc2_act = t.fc2_pre;
    relu_inplace(t.fc2_act);
    t.logits = dense_forward(params_.at("fc3.W").values, params_.at("fc3.b").values, t.fc2_act);
    return t;
}

std::vector<double> CnnModel::logits(const Image& image) const { return trace(image).logits; }

std::vector<double> CnnModel::predict(const Image& image) const { return softmax(logits(image)); }

double CnnModel::loss_and_gradient(std::span<const Image* const> batch, std::span<const int> labels,
                                   ParamSet& grad) const {
    if (batch.empty() || batch.size() != labels.size()) throw ShapeError("cnn: batch/label size mismatch");
    if (!grad.same_layout(params_)) grad = params_.zeros_like();
    grad.fill(0.0);
    const double scale = 1.0 / static_cast<double>(batch.size());
    const auto& fc1w = params_.at("fc1.W").values;
    const auto& fc2w = params_.at("fc2.W").values;
    const auto& fc3w = params_.at("fc3.W").values;
    double total = 0.0;

    std::vector<double> d_logits(shape_.classes), d_fc2(shape_.fc2), d_fc1(shape_.fc1);
    for (std::size_t n = 0; n < batch.size(); ++n) {
        const CnnTrace t = trace(*batch[n]);
        total += cross_entropy_from_logits(t.logits, labels[n]);

        cross_entropy_grad(t.logits, labels[n], scale, d_logits);
        dense_backward(fc3w, t.fc2_act, d_logits, grad.at("fc3.W").values, grad.at("fc3.b").values, d_fc2);
        relu_backward(t.fc2_pre, d_fc2);
        dense_backward(fc2w, t.fc1_act, d_fc2, grad.at("fc2.W").values, grad.at("fc2.b").values, d_fc1);
        relu_backward(t.fc1_pre, d_fc1);
        FeatureMap d_pool2(t.pool2.output.height, t.pool2.output.width, t.pool2.output.channels);
        dense_backward(fc1w, t.pool2.output.data, d_fc1, grad.at("fc1.W").values, grad.at("fc1.b").values,
                       d_pool2.data);

        FeatureMap d_conv2(t.conv2_act.height, t.conv2_act.width, t.conv2_act.channels);
        maxpool2_backward(t.pool2, d_pool2, d_conv2);
        relu_backward(t.conv2_pre.data, d_conv2.data);
        FeatureMap d_pool1;
        conv2d_backward(t.pool1.output, conv2(), d_conv2, grad.at("conv2.kernel").values,
                        grad.at("conv2.bias").values, &d_pool1);

        FeatureMap d_conv1(t.conv1_act.height, t.conv1_act.width, t.conv1_act.channels);
        maxpool2_backward(t.pool1, d_pool1, d_conv1);
        relu_backward(t.conv1_pre.data, d_conv1.data);
        conv2d_backward(t.input, conv1(), d_conv1, grad.at("conv1.kernel").values, grad.at("conv1.bias").values,
                        nullptr);
    }
    return total * scale;
}

std::vector<double> cnn_forward(const Image& image, const CnnModel& model) { return model.predict(image); }

}  // namespace hsi::nn
