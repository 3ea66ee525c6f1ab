#include "hsi/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "hsi/error.hpp"

namespace hsi::nn {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'H', 'S', 'I', 'C', 'K', 'P', 'T', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    json tensors = json::array();
    std::size_t offset = 0;
    for (const auto& t : checkpoint.params.tensors()) {
        tensors.push_back({{"name", t.name},
                           {"kind", t.kind == TensorKind::weight ? "weight" : "bias"},
                           {"shape", t.shape},
                           {"offset", offset},
                           {"count", t.size()}});
        offset += t.size();
    }
    const json header = {{"format", "hsi-checkpoint"},
                         {"version", 1},
                         {"dtype", "float64"},
                         {"model", checkpoint.model},
                         {"shape", checkpoint.shape},
                         {"tensors", tensors}};
    const std::string text = header.dump();
    const std::uint64_t len = text.size();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : checkpoint.params.tensors()) {
        out.write(reinterpret_cast<const char*>(t.values.data()),
                  static_cast<std::streamsize>(t.values.size() * sizeof(double)));
    }
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw FormatError("checkpoint: bad magic");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || len == 0 || len > (64ull << 20)) throw FormatError("checkpoint: bad header length");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw FormatError("checkpoint: truncated header");

    Checkpoint ck;
    try {
        const json header = json::parse(text);
        if (header.at("format") != "hsi-checkpoint") throw FormatError("checkpoint: wrong format tag");
        ck.model = header.at("model").get<std::string>();
        ck.shape = header.at("shape");
        std::size_t expected_offset = 0;
        for (const auto& t : header.at("tensors")) {
            const auto kind = t.at("kind").get<std::string>() == "bias" ? TensorKind::bias : TensorKind::weight;
            Tensor& tensor = ck.params.add(t.at("name").get<std::string>(),
                                           t.at("shape").get<std::vector<std::size_t>>(), kind);
            if (t.at("count").get<std::size_t>() != tensor.size() ||
                t.at("offset").get<std::size_t>() != expected_offset) {
                throw FormatError("checkpoint: tensor '" + tensor.name + "' count/offset disagree with its shape");
            }
            expected_offset += tensor.size();
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint header: ") + e.what());
    }
    for (auto& t : ck.params.tensors()) {
        in.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!in) throw FormatError("checkpoint: payload shorter than header declares");
    }
    in.peek();
    if (!in.eof()) throw FormatError("checkpoint: trailing bytes after payload");
    return ck;
}

json to_json(const CnnShape& s) {
    return {{"input_size", s.input_size},   {"conv1_kernel", s.conv1_kernel}, {"conv1_channels", s.conv1_channels},
            {"conv2_kernel", s.conv2_kernel}, {"conv2_channels", s.conv2_channels}, {"fc1", s.fc1},
            {"fc2", s.fc2},                 {"classes", s.classes}};
}

CnnShape cnn_shape_from_json(const json& j) {
    CnnShape s;
    s.input_size = j.value("input_size", s.input_size);
    s.conv1_kernel = j.value("conv1_kernel", s.conv1_kernel);
    s.conv1_channels = j.value("conv1_channels", s.conv1_channels);
    s.conv2_kernel = j.value("conv2_kernel", s.conv2_kernel);
    s.conv2_channels = j.value("conv2_channels", s.conv2_channels);
    s.fc1 = j.value("fc1", s.fc1);
    s.fc2 = j.value("fc2", s.fc2);
    s.classes = j.value("classes", s.classes);
    return s;
}

json to_json(const LstmShape& s) {
    return {{"input_size", s.input_size},
            {"hidden_size", s.hidden_size},
            {"classes", s.classes},
            {"candidate", s.candidate == CandidateActivation::sigmoid ? "sigmoid" : "tanh"},
            {"forget_bias", s.forget_bias},
            {"label_smoothing", s.label_smoothing}};
}

LstmShape lstm_shape_from_json(const json& j) {
    LstmShape s;
    s.input_size = j.value("input_size", s.input_size);
    s.hidden_size = j.value("hidden_size", s.hidden_size);
    s.classes = j.value("classes", s.classes);
    const std::string cand = j.value("candidate", std::string("sigmoid"));
    if (cand != "sigmoid" && cand != "tanh") throw ConfigError("lstm shape: candidate must be sigmoid or tanh");
    s.candidate = cand == "tanh" ? CandidateActivation::tanh : CandidateActivation::sigmoid;
    s.forget_bias = j.value("forget_bias", s.forget_bias);
    s.label_smoothing = j.value("label_smoothing", s.label_smoothing);
    return s;
}

void save_model(const CnnModel& model, const std::filesystem::path& path) {
    save_checkpoint({"cnn", to_json(model.shape()), model.params()}, path);
}

CnnModel load_cnn_model(const std::filesystem::path& path) {
    Checkpoint ck = load_checkpoint(path);
    if (ck.model != "cnn") throw FormatError("checkpoint '" + path.string() + "' holds a " + ck.model + " model");
    return CnnModel(cnn_shape_from_json(ck.shape), std::move(ck.params));
}

void save_model(const LstmModel& model, const std::filesystem::path& path) {
    save_checkpoint({"lstm", to_json(model.shape()), model.params()}, path);
}

LstmModel load_lstm_model(const std::filesystem::path& path) {
    Checkpoint ck = load_checkpoint(path);
    if (ck.model != "lstm") throw FormatError("checkpoint '" + path.string() + "' holds a " + ck.model + " model");
    return LstmModel(lstm_shape_from_json(ck.shape), std::move(ck.params));
}

}  // namespace hsi::nn
