#pragma once

// Seeded minibatch training loop shared by the LSTM and CNN classifiers.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsi/error.hpp"
#include "hsi/image.hpp"
#include "hsi/nn/adam.hpp"
#include "hsi/nn/layers.hpp"
#include "hsi/nn/params.hpp"
#include "hsi/rng.hpp"

namespace hsi::nn {

struct TrainConfig {
    int batch_size = 32;
    double learning_rate = 0.001;
    long iterations = 1000;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t rng_seed = 0;
    long loss_record_stride = 1;
    /// L2 penalty (weight_decay / 2) * |w|^2 on weight tensors; biases exempt.
    /// Added to the optimized objective only: recorded losses stay pure
    /// cross-entropy.
    double weight_decay = 0.0;

    /// Throws ConfigError when an invariant is broken.
    void validate() const;

    AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_eps}; }
};

nlohmann::json to_json(const TrainConfig& config);
/// Keys missing from `j` keep the values of `defaults`; unknown keys are a
/// ConfigError.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig defaults = {});

struct LossCurve {
    std::vector<long> iterations;
    std::vector<double> losses;  // mean cross-entropy (nats) over each stride

    bool empty() const noexcept { return iterations.empty(); }
    std::size_t size() const noexcept { return iterations.size(); }

    friend bool operator==(const LossCurve&, const LossCurve&) = default;
};

struct Dataset {
    std::vector<Image> samples;
    std::vector<int> labels;

    std::size_t size() const noexcept { return samples.size(); }
};

template <class M>
concept Classifier = requires(const M& m, std::span<const Image* const> batch, std::span<const int> labels,
                              ParamSet& grad, const Image& image, const typename M::Shape& shape) {
    { m.params() } -> std::convertible_to<const ParamSet&>;
    { m.loss_and_gradient(batch, labels, grad) } -> std::same_as<double>;
    { m.predict(image) } -> std::same_as<std::vector<double>>;
    { M::initialize(shape, std::uint64_t{}) } -> std::same_as<M>;
};

template <class M>
struct TrainResult {
    M model;
    LossCurve curve;
    double train_accuracy = 0.0;
};

/// argmax of the class probabilities; ties go to the lower class index.
inline int predicted_class(std::span<const double> probabilities) {
    int best = 0;
    for (std::size_t i = 1; i < probabilities.size(); ++i)
        if (probabilities[i] > probabilities[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
}

template <Classifier M>
double accuracy(const M& model, const Dataset& data) {
    if (data.size() == 0) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (predicted_class(model.predict(data.samples[i])) == data.labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

/// Adds the weight-decay term's gradient to `grad`.
void apply_weight_decay(const ParamSet& params, ParamSet& grad, double weight_decay);

/// Throws ConfigError unless both classes 0 and 1 are present.
void check_two_classes(const Dataset& data);

/// Initializes M from derive_seed(rng_seed, "init"), samples minibatches with
/// replacement from derive_seed(rng_seed, "batch"), runs `iterations` Adam
/// steps and records the mean minibatch loss every `loss_record_stride`
/// steps. Throws TrainingError on a non-finite loss.
template <Classifier M>
TrainResult<M> train_classifier(const typename M::Shape& shape, const Dataset& data, const TrainConfig& config) {
    config.validate();
    if (data.samples.size() != data.labels.size()) throw ShapeError("train: sample/label count mismatch");
    check_two_classes(data);

    M model = M::initialize(shape, derive_seed(config.rng_seed, "init"));
    std::mt19937_64 sampler(derive_seed(config.rng_seed, "batch"));
    std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
    AdamState state = AdamState::for_params(model.params());
    const AdamConfig adam = config.adam();

    const auto batch_n = static_cast<std::size_t>(config.batch_size);
    std::vector<const Image*> batch(batch_n);
    std::vector<int> labels(batch_n);
    ParamSet grad = model.params().zeros_like();
    LossCurve curve;
    double window_sum = 0.0;
    long window_count = 0;

    for (long it = 1; it <= config.iterations; ++it) {
        for (std::size_t k = 0; k < batch_n; ++k) {
            const std::size_t idx = pick(sampler);
            batch[k] = &data.samples[idx];
            labels[k] = data.labels[idx];
        }
        const double loss = model.loss_and_gradient(batch, labels, grad);
        if (!std::isfinite(loss)) throw TrainingError(it);
        if (config.weight_decay > 0.0) apply_weight_decay(model.params(), grad, config.weight_decay);
        adam_step(model.params(), grad, state, adam);

        window_sum += loss;
        ++window_count;
        if (it % config.loss_record_stride == 0 || it == config.iterations) {
            curve.iterations.push_back(it);
            curve.losses.push_back(window_sum / static_cast<double>(window_count));
            window_sum = 0.0;
            window_count = 0;
        }
    }
    const double acc = accuracy(model, data);
    return TrainResult<M>{std::move(model), std::move(curve), acc};
}

}  // namespace hsi::nn
