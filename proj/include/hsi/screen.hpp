#pragma once

// Noise screening of band intervals. A fresh LSTM is trained on the
// single-band images of each interval; intervals whose loss takes longer to
// settle are treated as noisier and removed.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsi/bands.hpp"
#include "hsi/nn/lstm.hpp"
#include "hsi/nn/train.hpp"
#include "hsi/segmentation.hpp"

namespace hsi {

/// The loss has settled at recorded point t when, for `patience`
/// consecutive windows ending at t, t - window, ..., the mean of the window
/// fell by less than `rel_eps` relative to the window before it.
/// `window` counts recorded points, not training iterations.
struct ConvergenceCriterion {
    std::size_t window = 20;
    double rel_eps = 1e-3;
    std::size_t patience = 2;

    void validate() const;
    friend bool operator==(const ConvergenceCriterion&, const ConvergenceCriterion&) = default;
};

/// Smallest recorded iteration satisfying the criterion, or the last
/// recorded iteration if none does. Throws ShapeError on an empty curve.
long convergence_iteration(const nn::LossCurve& curve, const ConvergenceCriterion& crit);

enum class Verdict { keep, remove };
std::string to_string(Verdict v);

struct RemovalRule {
    enum class Kind { above_mean, top_k, factor };
    Kind kind = Kind::above_mean;
    std::size_t k = 1;       // top_k
    double c = 1.2;          // factor
    double tolerance = 1.0;  // above_mean: remove only when value > mean + tolerance

    static RemovalRule above_mean() { return {}; }
    static RemovalRule top(std::size_t k) { return {Kind::top_k, k, 1.2, 1.0}; }
    static RemovalRule factor_of_median(double c) { return {Kind::factor, 1, c, 1.0}; }

    /// "above_mean" ("above-mean"), "top_k:K", "factor:C".
    static RemovalRule parse(const std::string& text);
    std::string name() const;
};

/// Verdicts from the per-interval mean convergence iterations alone.
/// top_k breaks ties by the lower interval position.
std::vector<Verdict> apply_removal_rule(const std::vector<double>& mean_iterations, const RemovalRule& rule);

struct ScreenConfig {
    nn::TrainConfig train;
    std::size_t hidden_size = 16;
    nn::CandidateActivation candidate = nn::CandidateActivation::sigmoid;
    /// Target smoothing of the LSTM loss. A positive value gives the loss a
    /// floor, so a run that separates its training set levels off instead of
    /// decaying geometrically.
    double label_smoothing = 0.1;
    ConvergenceCriterion criterion;
    std::size_t repeats = 3;
    RemovalRule rule;
    int threads = 1;

    ScreenConfig();
    void validate() const;
};

struct IntervalConvergence {
    BandInterval interval;
    std::vector<long> iterations;  // per repeat
    long mean_iteration = 0;       // rounded mean over repeats
    std::vector<nn::LossCurve> curves;
    double train_accuracy = 0.0;   // mean over repeats
    Verdict verdict = Verdict::keep;
};

struct ConvergenceReport {
    std::vector<IntervalConvergence> intervals;
    RemovalRule rule;
    std::size_t repeats = 0;
    long iteration_budget = 0;

    std::vector<BandInterval> kept() const;
    std::vector<BandInterval> removed() const;
    /// 1-based positions of removed intervals.
    std::vector<std::size_t> removed_positions() const;
};

/// Single-band images of every ROI for the bands of `interval`, labeled by
/// seed class. Image rows are the LSTM time steps.
nn::Dataset interval_dataset(const std::vector<SeedROI>& rois, const BandInterval& interval);

/// Trains `repeats` LSTMs per interval. Run (interval k, repeat r) uses
/// derive_seed(config.train.rng_seed, "screen", {k, r}).
ConvergenceReport screen_intervals(const std::vector<SeedROI>& rois, const std::vector<BandInterval>& intervals,
                                   const ScreenConfig& config);

nlohmann::json to_json(const ConvergenceCriterion& crit);
ConvergenceCriterion criterion_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScreenConfig& config);
ScreenConfig screen_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ConvergenceReport& report);

/// Columns interval,repeat,iteration,loss.
void write_curves_csv(const ConvergenceReport& report, const std::string& path);

}  // namespace hsi
