#pragma once

// End-to-end workflow: calibrate -> segment -> screen -> scan -> final
// retrain -> verification. Each stage persists its output under the output
// directory, and the whole run is summarized in report.json.
//
// Randomness derivation from the base seed (derive_seed(seed, tag)):
//   "synth"         synthetic input spec rng_seed
//   "verify.synth"  synthetic verification spec rng_seed
//   "screen"        screen train.rng_seed (per run: "screen", {k, r} below it)
//   "split"         train/test split of the main data
//   "scan"          band-scan CNN
//   "final"         reinitialized CNN on the selected interval
//   "top"           CNN on the pooled top bands
//   "verify.split", "verify", "verify.top"  the verification counterparts

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsi/band_scan.hpp"
#include "hsi/bands.hpp"
#include "hsi/hypercube.hpp"
#include "hsi/screen.hpp"
#include "hsi/segmentation.hpp"
#include "hsi/synth.hpp"

namespace hsi {

struct SegmentOptions {
    std::size_t band = 60;  // 1-based reference band
    std::size_t margin = 8;
    double percentile = 1.0;
    std::size_t target = 64;
    std::size_t min_area = 25;
};

struct Segmentation {
    BinaryMask mask;
    double threshold = 0.0;
    std::vector<BoundingBox> boxes;
    std::vector<SeedROI> rois;
};

/// Threshold from the border ring of the reference band, binarize, box the
/// components and cut ROIs. `labels` must have one entry per box.
Segmentation segment_seeds(const HyperCube& cube, const std::vector<SeedClass>& labels, const SegmentOptions& options);

/// Where seed images come from.
struct DataSource {
    enum class Kind { synthetic, synthetic_scene, rois, raw };
    Kind kind = Kind::synthetic;
    SynthSpec spec;               // synthetic, synthetic_scene
    std::filesystem::path dir;    // rois
    std::filesystem::path raw;    // raw
    std::filesystem::path dark;
    std::filesystem::path white;
    std::filesystem::path labels;
    CubeFormat format = CubeFormat::native;
    /// raw and synthetic_scene. For synthetic_scene band 0 means the
    /// scene's own reference band and target 0 the SynthSpec image size.
    SegmentOptions segmentation{0, 8, 1.0, 0, 25};
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "out";
    int threads = 1;  // not echoed: results do not depend on it
    DataSource input;
    std::size_t interval_count = 5;
    bool screen_enabled = true;
    ScreenConfig screen;
    bool scan_enabled = true;
    ScanConfig scan;
    ScanConfig final_stage;
    SplitSpec split;
    double threshold = 0.90;
    std::optional<DataSource> verification;

    /// Throws ConfigError for invalid values or missing input files.
    void validate() const;
};

/// Relative paths inside `j` are resolved against `base_dir`. Unknown keys
/// are a ConfigError.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
nlohmann::json to_json(const PipelineConfig& config);
nlohmann::json to_json(const DataSource& source);

/// Output of the band scan over the surviving bands.
struct ScanOutcome {
    ScanTraining training;
    BandAccuracyProfile profile{};
    std::vector<IntervalStats> interval_stats{};
    BandInterval selected{};
    double baseline_accuracy = 0.0;  // pooled test accuracy over every scanned band
};

ScanOutcome run_scan(const std::vector<SeedROI>& rois, const std::vector<BandInterval>& kept, const Split& split,
                     const ScanConfig& config);

/// Reinitialized CNN on one band set, its per-band profile and the pooled
/// retrain on the bands at or above the threshold.
struct RetrainOutcome {
    ScanTraining training;
    BandAccuracyProfile profile{};
    ProfileStats stats{};
    double accuracy = 0.0;  // pooled test accuracy over the band set
    std::vector<std::size_t> top_bands{};
    std::optional<double> top_band_accuracy{};  // absent when no band reaches the threshold
};

/// `top_seed` seeds the pooled top-band model; config.train.rng_seed the main one.
RetrainOutcome retrain(const std::vector<SeedROI>& rois, const std::vector<BandInterval>& bands, const Split& split,
                       const ScanConfig& config, std::uint64_t top_seed);

/// Retrain on a second set of seeds restricted to `bands`. Throws
/// ConfigError when a band lies outside the verification cubes.
RetrainOutcome verify_transfer(const std::vector<BandInterval>& bands, const std::vector<SeedROI>& rois,
                               const Split& split, const ScanConfig& config, std::uint64_t top_seed);

struct StageRecord {
    std::string name;
    std::string status;  // done, skipped, failed, not_run
    std::string note;
};

struct FinalReport {
    bool complete = false;
    std::string failed_stage;
    std::string error;
    std::vector<StageRecord> stages;
    nlohmann::json config;   // echoed configuration
    nlohmann::json seeds;    // every derived seed by tag
    nlohmann::json data;     // input summary (and ground truth for synthetic input)
    std::vector<BandInterval> partition;
    std::optional<ConvergenceReport> screen;
    std::vector<BandInterval> kept;
    std::vector<BandInterval> removed;
    Split split;
    std::optional<ScanOutcome> scan;
    std::vector<BandInterval> selected;
    std::optional<RetrainOutcome> final_stage;
    std::optional<RetrainOutcome> verification;
    std::optional<double> profile_correlation;
};

nlohmann::json to_json(const FinalReport& report);

/// Runs every stage and writes report.json (also on failure, flagged
/// incomplete). Throws StageError naming the failed stage.
FinalReport run_pipeline(const PipelineConfig& config);

/// Loads or builds the ROIs of a data source; `seed` replaces the synthetic
/// SynthSpec rng_seed. Writes the calibrated cube to `calibrated_path` when set.
struct LoadedData {
    std::vector<SeedROI> rois;
    std::optional<GroundTruth> truth;
    std::optional<Segmentation> segmentation;
    std::size_t band_count = 0;
    std::vector<double> wavelengths;
    bool calibrated_here = false;
};

LoadedData load_data(const DataSource& source, std::uint64_t seed,
                     const std::optional<std::filesystem::path>& calibrated_path = std::nullopt);

}  // namespace hsi
