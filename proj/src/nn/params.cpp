#include "hsi/nn/params.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "hsi/error.hpp"

namespace hsi::nn {

Tensor& ParamSet::add(std::string name, std::vector<std::size_t> shape, TensorKind kind) {
    if (contains(name)) throw ShapeError("param set: duplicate tensor '" + name + "'");
    const std::size_t n =
        std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<std::size_t>());
    tensors_.push_back(Tensor{std::move(name), std::move(shape), kind, std::vector<double>(n, 0.0)});
    return tensors_.back();
}

Tensor& ParamSet::at(const std::string& name) {
    for (auto& t : tensors_)
        if (t.name == name) return t;
    throw ShapeError("param set: no tensor named '" + name + "'");
}

const Tensor& ParamSet::at(const std::string& name) const {
    for (const auto& t : tensors_)
        if (t.name == name) return t;
    throw ShapeError("param set: no tensor named '" + name + "'");
}

bool ParamSet::contains(const std::string& name) const {
    return std::any_of(tensors_.begin(), tensors_.end(), [&](const Tensor& t) { return t.name == name; });
}

std::size_t ParamSet::total_size() const noexcept {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
}

ParamSet ParamSet::zeros_like() const {
    ParamSet out = *this;
    out.fill(0.0);
    return out;
}

void ParamSet::fill(double value) {
    for (auto& t : tensors_) std::fill(t.values.begin(), t.values.end(), value);
}

bool ParamSet::same_layout(const ParamSet& other) const {
    if (tensors_.size() != other.tensors_.size()) return false;
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        const auto& a = tensors_[i];
        const auto& b = other.tensors_[i];
        if (a.name != b.name || a.shape != b.shape || a.kind != b.kind || a.size() != b.size()) return false;
    }
    return true;
}

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace hsi::nn
