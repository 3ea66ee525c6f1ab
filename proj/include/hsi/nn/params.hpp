#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace hsi::nn {

enum class TensorKind { weight, bias };

struct Tensor {
    std::string name;
    std::vector<std::size_t> shape;
    TensorKind kind = TensorKind::weight;
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    std::span<double> span() noexcept { return values; }
    std::span<const double> span() const noexcept { return values; }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Ordered, named collection of parameter tensors. Gradients, Adam moments
/// and checkpoints all share this layout, keyed by tensor name.
class ParamSet {
public:
    Tensor& add(std::string name, std::vector<std::size_t> shape, TensorKind kind);

    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool contains(const std::string& name) const;

    std::vector<Tensor>& tensors() noexcept { return tensors_; }
    const std::vector<Tensor>& tensors() const noexcept { return tensors_; }

    std::size_t total_size() const noexcept;

    /// Same names and shapes, all values zero.
    ParamSet zeros_like() const;
    void fill(double value);

    /// True when names, kinds and shapes match in order.
    bool same_layout(const ParamSet& other) const;

    friend bool operator==(const ParamSet&, const ParamSet&) = default;

private:
    std::vector<Tensor> tensors_;
};

/// Glorot-uniform bound sqrt(6 / (fan_in + fan_out)).
double glorot_bound(std::size_t fan_in, std::size_t fan_out);

}  // namespace hsi::nn
