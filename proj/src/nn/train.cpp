#include "hsi/nn/train.hpp"

namespace hsi::nn {

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
    if (iterations < 1) throw ConfigError("train config: iterations must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("train config: learning_rate must be a finite value >= 0");
    }
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw ConfigError("train config: Adam betas must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw ConfigError("train config: adam_eps must be > 0");
    if (loss_record_stride < 1) throw ConfigError("train config: loss_record_stride must be >= 1");
    if (!(weight_decay >= 0.0)) throw ConfigError("train config: weight_decay must be >= 0");
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"iterations", c.iterations},
            {"adam_beta1", c.adam_beta1},
            {"adam_beta2", c.adam_beta2},
            {"adam_eps", c.adam_eps},
            {"rng_seed", c.rng_seed},
            {"loss_record_stride", c.loss_record_stride},
            {"weight_decay", c.weight_decay}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
    if (!j.is_object()) throw ConfigError("train config must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "batch_size") c.batch_size = value.get<int>();
            else if (key == "learning_rate") c.learning_rate = value.get<double>();
            else if (key == "iterations") c.iterations = value.get<long>();
            else if (key == "adam_beta1") c.adam_beta1 = value.get<double>();
            else if (key == "adam_beta2") c.adam_beta2 = value.get<double>();
            else if (key == "adam_eps") c.adam_eps = value.get<double>();
            else if (key == "rng_seed") c.rng_seed = value.get<std::uint64_t>();
            else if (key == "loss_record_stride") c.loss_record_stride = value.get<long>();
            else if (key == "weight_decay") c.weight_decay = value.get<double>();
            else throw ConfigError("train config: unknown key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

void apply_weight_decay(const ParamSet& params, ParamSet& grad, double weight_decay) {
    const auto& pt = params.tensors();
    auto& gt = grad.tensors();
    for (std::size_t k = 0; k < pt.size(); ++k) {
        if (pt[k].kind != TensorKind::weight) continue;
        for (std::size_t i = 0; i < pt[k].values.size(); ++i) gt[k].values[i] += weight_decay * pt[k].values[i];
    }
}

void check_two_classes(const Dataset& data) {
    bool seen[2] = {false, false};
    for (int label : data.labels) {
        if (label != 0 && label != 1) throw ConfigError("train: labels must be 0 or 1");
        seen[label] = true;
    }
    if (!seen[0] || !seen[1]) throw ConfigError("train: dataset must contain both classes");
}

}  // namespace hsi::nn
