#pragma once

// Band-by-band evaluation of a CNN: split seeds, train on a band set, build
// per-band accuracy profiles, summarize them and pick the interval where
// high accuracies concentrate.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsi/bands.hpp"
#include "hsi/nn/cnn.hpp"
#include "hsi/nn/train.hpp"
#include "hsi/segmentation.hpp"

namespace hsi {

struct SplitSpec {
    std::size_t train_per_class = 12;
    std::uint64_t rng_seed = 0;
};

/// Seed ids on each side of the split, ascending.
struct Split {
    std::vector<int> train_ids;
    std::vector<int> test_ids;
    friend bool operator==(const Split&, const Split&) = default;
};

/// Uniform sampling without replacement inside each class. Throws
/// ConfigError when a class has fewer than train_per_class + 1 seeds or
/// train_per_class is 0.
Split split_dataset(const std::vector<SeedROI>& rois, const SplitSpec& spec);

struct ScanConfig {
    nn::TrainConfig train;
    /// Network shape; input_size is overwritten with the ROI size.
    nn::CnnShape shape;
    double threshold = 0.90;
    int threads = 1;

    ScanConfig();
    void validate() const;
};

/// Single-band images of the given seeds over the given bands, labeled by
/// seed class; in the order of `seed_ids`, then band.
nn::Dataset band_dataset(const std::vector<SeedROI>& rois, std::span<const int> seed_ids,
                         std::span<const std::size_t> bands);

struct ScanTraining {
    nn::CnnModel model;
    nn::LossCurve curve;
    double train_accuracy = 0.0;
};

/// Trains a freshly initialized CNN on every (train seed, band in band_set)
/// image. Throws ConfigError on an empty band set.
ScanTraining train_scan_cnn(const std::vector<SeedROI>& rois, const std::vector<BandInterval>& band_set,
                            const Split& split, const ScanConfig& config);

struct BandAccuracyProfile {
    std::vector<std::size_t> bands;  // 1-based band numbers
    std::vector<double> accuracy;    // fraction of test seeds classified correctly at each band
    std::string interval_label;
};

/// For each band, the fraction of test seeds whose image at that band the
/// model classifies correctly. Bands are evaluated independently and may run
/// on `threads` workers.
BandAccuracyProfile per_band_accuracy(const nn::CnnModel& model, const std::vector<SeedROI>& rois,
                                      std::span<const int> test_ids, std::span<const std::size_t> bands,
                                      int threads = 1);

/// Fraction of correctly classified (test seed, band) images.
double pooled_accuracy(const nn::CnnModel& model, const std::vector<SeedROI>& rois, std::span<const int> test_ids,
                       std::span<const std::size_t> bands, int threads = 1);

struct ProfileStats {
    double mean = 0.0;
    double max = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for a single band
    std::size_t count_ge_threshold = 0;
    double threshold = 0.9;
};

/// Throws ShapeError on an empty profile.
ProfileStats profile_stats(std::span<const double> accuracy, double threshold);
ProfileStats profile_stats(const BandAccuracyProfile& profile, double threshold);

struct IntervalStats {
    BandInterval interval;
    ProfileStats stats;
};

/// Interval with the largest (count_ge_threshold, mean, max); exact ties go
/// to the lowest interval so the result does not depend on list order.
/// Throws ShapeError on an empty list.
BandInterval select_dense_interval(const std::vector<IntervalStats>& stats);

/// Ascending band numbers whose accuracy is >= threshold.
std::vector<std::size_t> select_top_bands(const BandAccuracyProfile& profile, double threshold);

/// Pearson product-moment correlation. Throws ShapeError on unequal or
/// too-short inputs and on zero variance.
double pearson_corr(std::span<const double> a, std::span<const double> b);

/// Restriction of a profile to the bands of one interval.
BandAccuracyProfile restrict_profile(const BandAccuracyProfile& profile, const BandInterval& interval);

nlohmann::json to_json(const BandAccuracyProfile& profile);
nlohmann::json to_json(const ProfileStats& stats);
nlohmann::json to_json(const Split& split);
nlohmann::json to_json(const ScanConfig& config);
ScanConfig scan_config_from_json(const nlohmann::json& j);

/// Columns band,wavelength_nm,accuracy. `wavelengths` is indexed by band - 1.
void write_profile_csv(const BandAccuracyProfile& profile, std::span<const double> wavelengths,
                       const std::filesystem::path& path);

}  // namespace hsi
