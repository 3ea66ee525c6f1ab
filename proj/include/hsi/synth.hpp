#pragma once

// Synthetic hyperspectral seed data with planted ground truth: per-interval
// Gaussian noise levels and one class-discriminative band interval.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsi/bands.hpp"
#include "hsi/hypercube.hpp"
#include "hsi/segmentation.hpp"

namespace hsi {

/// Elliptical seed blob; sizes are fractions of the image side. The jitters
/// default to 0: with per-seed shapes an LSTM can tell seeds apart by outline
/// alone and fit arbitrary labels even on quiet intervals.
struct BlobGeometry {
    double semi_major = 0.36;
    double semi_minor = 0.24;
    double axis_jitter = 0.0;     // +/- uniform, applied to both semi-axes
    double angle = 0.6;           // radians
    double angle_jitter = 0.0;    // +/- uniform
    double center_jitter = 0.0;   // +/- uniform, fraction of the side
    double shading = 0.3;         // reflectance falloff 1 - shading * r^2 towards the rim

    friend bool operator==(const BlobGeometry&, const BlobGeometry&) = default;
};

struct SynthSpec {
    std::size_t band_count = 50;
    std::size_t seeds_per_class = 20;
    std::size_t image_size = 32;
    std::vector<BandInterval> intervals;  // empty = five equal intervals
    std::vector<double> noise_std = {0.5, 0.05, 0.05, 0.05, 0.5};
    std::size_t signal_interval = 4;  // 1-based index into intervals
    double signal_strength = 0.3;
    BlobGeometry blob;
    double base_level = 0.45;  // mean seed reflectance
    double base_swing = 0.15;  // smooth variation of the base spectrum across bands
    double brightness_jitter = 0.05; // std of the per-seed albedo factor (mean 1) on the base spectrum
    double gain_jitter = 0.0;       // std of an extra factor drawn per (seed, band) image
    double noisy_factor = 2.0; // interval is "noisy" when its std exceeds the minimum by this factor
    std::string cultivar = "synthetic";
    std::uint64_t rng_seed = 0;

    /// Fills defaults (intervals) and throws ConfigError when invalid.
    void validate();
    std::vector<BandInterval> effective_intervals() const;
};

struct GroundTruth {
    std::vector<std::size_t> noisy_intervals;  // 1-based
    std::size_t discriminative_interval = 0;   // 1-based
    std::vector<SeedClass> labels;             // by seed id
};

struct SynthDataset {
    std::vector<SeedROI> rois;
    GroundTruth truth;
};

/// Seeds alternate haploid/diploid by id (even ids haploid). A blob pixel
/// holds albedo * base(band) * shading + noise; diploid seeds get an extra
/// +signal_strength on every blob pixel inside the signal interval.
SynthDataset generate_synthetic_dataset(const SynthSpec& spec);

/// Same seeds without noise; for construction checks.
SynthDataset generate_noiseless_dataset(const SynthSpec& spec);

/// Ground-truth blob mask of one seed (image_size x image_size).
BinaryMask synthetic_blob_mask(const SynthSpec& spec, int seed_id);

struct RawScene {
    HyperCube raw;                  // sensor counts
    CalibrationFrames frames;       // line frames broadcast over rows
    HyperCube reflectance;          // calibrated truth
    BinaryMask mask;                // seed pixels
    std::vector<BoundingBox> boxes; // sorted like extract_bounding_boxes
    std::vector<SeedClass> labels;  // per box
    std::size_t reference_band = 0; // 1-based band used for segmentation
};

/// Seeds laid out on a grid over a near-zero background, mapped to counts
/// through synthetic dark/white line references. Seed reflectance is floored
/// at 0.08 in the scene so every seed pixel clears the background threshold.
RawScene generate_raw_cube(const SynthSpec& spec);

nlohmann::json to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GroundTruth& truth);

}  // namespace hsi
