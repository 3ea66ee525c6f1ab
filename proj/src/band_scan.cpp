#include "hsi/band_scan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <tuple>

#include "hsi/error.hpp"
#include "hsi/nn/checkpoint.hpp"
#include "hsi/parallel.hpp"
#include "hsi/rng.hpp"

namespace hsi {

Split split_dataset(const std::vector<SeedROI>& rois, const SplitSpec& spec) {
    if (spec.train_per_class < 1) throw ConfigError("split: train_per_class must be >= 1");
    std::map<int, std::vector<int>> by_class;
    for (const auto& roi : rois) by_class[roi.class_index()].push_back(roi.seed_id);
    if (by_class.size() != 2) throw ConfigError("split: both classes must be present");
    Split split;
    for (auto& [cls, ids] : by_class) {
        if (ids.size() < spec.train_per_class + 1) {
            throw ConfigError("split: class " + to_string(static_cast<SeedClass>(cls)) + " has " +
                              std::to_string(ids.size()) + " seeds, need at least " +
                              std::to_string(spec.train_per_class + 1));
        }
        std::sort(ids.begin(), ids.end());
        std::mt19937_64 gen(derive_seed(spec.rng_seed, "split", {static_cast<std::uint64_t>(cls)}));
        for (std::size_t i = ids.size() - 1; i > 0; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i);
            std::swap(ids[i], ids[pick(gen)]);
        }
        split.train_ids.insert(split.train_ids.end(), ids.begin(),
                               ids.begin() + static_cast<std::ptrdiff_t>(spec.train_per_class));
        split.test_ids.insert(split.test_ids.end(), ids.begin() + static_cast<std::ptrdiff_t>(spec.train_per_class),
                              ids.end());
    }
    std::sort(split.train_ids.begin(), split.train_ids.end());
    std::sort(split.test_ids.begin(), split.test_ids.end());
    return split;
}

ScanConfig::ScanConfig() {
    train.batch_size = 32;
    train.learning_rate = 1e-3;
    train.iterations = 300;
    train.loss_record_stride = 10;
}

void ScanConfig::validate() const {
    train.validate();
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("scan: threshold must lie in [0, 1]");
}

namespace {

const SeedROI& roi_by_id(const std::vector<SeedROI>& rois, int id) {
    for (const auto& roi : rois)
        if (roi.seed_id == id) return roi;
    throw ConfigError("no ROI with seed id " + std::to_string(id));
}

std::vector<const SeedROI*> lookup(const std::vector<SeedROI>& rois, std::span<const int> ids) {
    std::vector<const SeedROI*> out;
    out.reserve(ids.size());
    for (int id : ids) out.push_back(&roi_by_id(rois, id));
    return out;
}

void check_bands(const std::vector<const SeedROI*>& rois, std::span<const std::size_t> bands) {
    for (const SeedROI* roi : rois)
        for (std::size_t b : bands)
            if (b < 1 || b > roi->stack.bands()) {
                throw ConfigError("band " + std::to_string(b) + " outside seed " + std::to_string(roi->seed_id) +
                                  " (" + std::to_string(roi->stack.bands()) + " bands)");
            }
}

}  // namespace

nn::Dataset band_dataset(const std::vector<SeedROI>& rois, std::span<const int> seed_ids,
                         std::span<const std::size_t> bands) {
    const auto selected = lookup(rois, seed_ids);
    check_bands(selected, bands);
    nn::Dataset data;
    for (const SeedROI* roi : selected)
        for (std::size_t b : bands) {
            data.samples.push_back(roi->stack.band_image(b - 1));
            data.labels.push_back(roi->class_index());
        }
    return data;
}

ScanTraining train_scan_cnn(const std::vector<SeedROI>& rois, const std::vector<BandInterval>& band_set,
                            const Split& split, const ScanConfig& config) {
    config.validate();
    if (band_set.empty()) throw ConfigError("scan: empty band set");
    const auto bands = bands_of(band_set);
    const nn::Dataset data = band_dataset(rois, split.train_ids, bands);
    if (data.size() == 0) throw ConfigError("scan: no training images");
    nn::CnnShape shape = config.shape;
    shape.input_size = data.samples.front().rows;
    auto result = nn::train_classifier<nn::CnnModel>(shape, data, config.train);
    return {std::move(result.model), std::move(result.curve), result.train_accuracy};
}

BandAccuracyProfile per_band_accuracy(const nn::CnnModel& model, const std::vector<SeedROI>& rois,
                                      std::span<const int> test_ids, std::span<const std::size_t> bands,
                                      int threads) {
    if (bands.empty()) throw ConfigError("per_band_accuracy: no bands");
    if (test_ids.empty()) throw ConfigError("per_band_accuracy: no test seeds");
    const auto selected = lookup(rois, test_ids);
    check_bands(selected, bands);
    BandAccuracyProfile profile;
    profile.bands.assign(bands.begin(), bands.end());
    profile.accuracy.assign(bands.size(), 0.0);
    parallel_for(bands.size(), threads, [&](std::size_t k) {
        std::size_t correct = 0;
        for (const SeedROI* roi : selected) {
            const auto probs = model.predict(roi->stack.band_image(bands[k] - 1));
            if (nn::predicted_class(probs) == roi->class_index()) ++correct;
        }
        profile.accuracy[k] = static_cast<double>(correct) / static_cast<double>(selected.size());
    });
    return profile;
}

double pooled_accuracy(const nn::CnnModel& model, const std::vector<SeedROI>& rois, std::span<const int> test_ids,
                       std::span<const std::size_t> bands, int threads) {
    const auto profile = per_band_accuracy(model, rois, test_ids, bands, threads);
    const double n = static_cast<double>(test_ids.size());
    double correct = 0.0;
    for (double a : profile.accuracy) correct += std::round(a * n);
    return correct / (n * static_cast<double>(bands.size()));
}

ProfileStats profile_stats(std::span<const double> acc, double threshold) {
    if (acc.empty()) throw ShapeError("profile_stats: empty profile");
    ProfileStats s;
    s.threshold = threshold;
    double sum = 0.0;
    s.max = acc[0];
    for (double a : acc) {
        sum += a;
        s.max = std::max(s.max, a);
        if (a >= threshold) ++s.count_ge_threshold;
    }
    const double n = static_cast<double>(acc.size());
    s.mean = sum / n;
    if (acc.size() > 1) {
        double ss = 0.0;
        for (double a : acc) ss += (a - s.mean) * (a - s.mean);
        s.std = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

ProfileStats profile_stats(const BandAccuracyProfile& profile, double threshold) {
    return profile_stats(profile.accuracy, threshold);
}

BandInterval select_dense_interval(const std::vector<IntervalStats>& stats) {
    if (stats.empty()) throw ShapeError("select_dense_interval: no intervals");
    auto key = [](const IntervalStats& s) {
        return std::make_tuple(s.stats.count_ge_threshold, s.stats.mean, s.stats.max);
    };
    const IntervalStats* best = &stats.front();
    for (const auto& s : stats) {
        if (key(s) > key(*best) || (key(s) == key(*best) && s.interval < best->interval)) best = &s;
    }
    return best->interval;
}

std::vector<std::size_t> select_top_bands(const BandAccuracyProfile& profile, double threshold) {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < profile.bands.size(); ++k)
        if (profile.accuracy[k] >= threshold) out.push_back(profile.bands[k]);
    std::sort(out.begin(), out.end());
    return out;
}

double pearson_corr(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("pearson_corr: vectors differ in length");
    if (a.size() < 2) throw ShapeError("pearson_corr: need at least two values");
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) throw ShapeError("pearson_corr: zero variance");
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

BandAccuracyProfile restrict_profile(const BandAccuracyProfile& profile, const BandInterval& interval) {
    BandAccuracyProfile out;
    out.interval_label = interval.label();
    for (std::size_t k = 0; k < profile.bands.size(); ++k)
        if (interval.contains(profile.bands[k])) {
            out.bands.push_back(profile.bands[k]);
            out.accuracy.push_back(profile.accuracy[k]);
        }
    return out;
}

nlohmann::json to_json(const BandAccuracyProfile& p) {
    return {{"interval", p.interval_label}, {"bands", p.bands}, {"accuracy", p.accuracy}};
}

nlohmann::json to_json(const ProfileStats& s) {
    return {{"mean", s.mean},
            {"max", s.max},
            {"std", s.std},
            {"count_ge_threshold", s.count_ge_threshold},
            {"threshold", s.threshold}};
}

nlohmann::json to_json(const Split& s) { return {{"train_ids", s.train_ids}, {"test_ids", s.test_ids}}; }

nlohmann::json to_json(const ScanConfig& c) {
    return {{"train", nn::to_json(c.train)}, {"network", nn::to_json(c.shape)}, {"threshold", c.threshold}};
}

ScanConfig scan_config_from_json(const nlohmann::json& j) {
    ScanConfig c;
    if (!j.is_object()) throw ConfigError("scan config must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "train") c.train = nn::train_config_from_json(value, c.train);
            else if (key == "network") c.shape = nn::cnn_shape_from_json(value);
            else if (key == "threshold") c.threshold = value.get<double>();
            else throw ConfigError("scan config: unknown key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scan config: ") + e.what());
    }
    c.validate();
    return c;
}

void write_profile_csv(const BandAccuracyProfile& profile, std::span<const double> wavelengths,
                       const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path.string());
    os.precision(17);
    os << "band,wavelength_nm,accuracy\n";
    for (std::size_t k = 0; k < profile.bands.size(); ++k) {
        const std::size_t b = profile.bands[k];
        os << b << ',';
        if (b >= 1 && b <= wavelengths.size()) os << wavelengths[b - 1];
        os << ',' << profile.accuracy[k] << '\n';
    }
    if (!os) throw Error("failed writing " + path.string());
}

}  // namespace hsi
