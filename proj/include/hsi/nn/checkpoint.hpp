#pragma once

// Parameter checkpoints: 8-byte magic "HSICKPT1", u64 little-endian header
// length, JSON header {format, version, model, shape, tensors:[{name, kind,
// shape, offset, count}]}, then every tensor's values as little-endian
// float64 in header order.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "hsi/nn/cnn.hpp"
#include "hsi/nn/lstm.hpp"
#include "hsi/nn/params.hpp"

namespace hsi::nn {

struct Checkpoint {
    std::string model;     // "cnn" or "lstm"
    nlohmann::json shape;  // model-specific shape description
    ParamSet params;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json to_json(const CnnShape& shape);
CnnShape cnn_shape_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LstmShape& shape);
LstmShape lstm_shape_from_json(const nlohmann::json& j);

void save_model(const CnnModel& model, const std::filesystem::path& path);
CnnModel load_cnn_model(const std::filesystem::path& path);
void save_model(const LstmModel& model, const std::filesystem::path& path);
LstmModel load_lstm_model(const std::filesystem::path& path);

}  // namespace hsi::nn
