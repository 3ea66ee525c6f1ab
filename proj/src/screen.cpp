#include "hsi/screen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "hsi/error.hpp"
#include "hsi/nn/checkpoint.hpp"
#include "hsi/parallel.hpp"
#include "hsi/rng.hpp"

namespace hsi {

void ConvergenceCriterion::validate() const {
    if (window < 1) throw ConfigError("convergence criterion: window must be >= 1");
    if (!(rel_eps > 0.0)) throw ConfigError("convergence criterion: rel_eps must be > 0");
    if (patience < 1) throw ConfigError("convergence criterion: patience must be >= 1");
}

namespace {

double window_mean(const std::vector<double>& v, std::size_t end, std::size_t w) {
    double sum = 0.0;
    for (std::size_t i = end + 1 - w; i <= end; ++i) sum += v[i];
    return sum / static_cast<double>(w);
}

}  // namespace

long convergence_iteration(const nn::LossCurve& curve, const ConvergenceCriterion& crit) {
    crit.validate();
    if (curve.empty()) throw ShapeError("convergence_iteration: empty loss curve");
    if (curve.losses.size() != curve.iterations.size()) throw ShapeError("convergence_iteration: ragged curve");
    const std::size_t n = curve.size();
    const std::size_t w = crit.window;
    const std::size_t first = (crit.patience + 1) * w - 1;
    for (std::size_t t = first; t < n; ++t) {
        bool settled = true;
        for (std::size_t k = 0; k < crit.patience && settled; ++k) {
            const std::size_t end = t - k * w;
            const double cur = window_mean(curve.losses, end, w);
            const double prev = window_mean(curve.losses, end - w, w);
            settled = (prev - cur) < crit.rel_eps * prev || prev == cur;
        }
        if (settled) return curve.iterations[t];
    }
    return curve.iterations.back();
}

std::string to_string(Verdict v) { return v == Verdict::keep ? "keep" : "remove"; }

RemovalRule RemovalRule::parse(const std::string& text) {
    auto arg = [&](std::size_t prefix) { return text.substr(prefix); };
    try {
        if (text == "above_mean" || text == "above-mean") return above_mean();
        if (text.rfind("top_k:", 0) == 0 || text.rfind("top-k:", 0) == 0) {
            const long k = std::stol(arg(6));
            if (k < 1) throw ConfigError("removal rule: k must be >= 1");
            return top(static_cast<std::size_t>(k));
        }
        if (text.rfind("factor:", 0) == 0) {
            const double c = std::stod(arg(7));
            if (!(c > 0.0)) throw ConfigError("removal rule: factor must be > 0");
            return factor_of_median(c);
        }
    } catch (const std::logic_error&) {
    }
    throw ConfigError("unknown removal rule '" + text + "' (expected above_mean, top_k:K or factor:C)");
}

std::string RemovalRule::name() const {
    switch (kind) {
        case Kind::above_mean: return "above_mean";
        case Kind::top_k: return "top_k:" + std::to_string(k);
        case Kind::factor: {
            nlohmann::json j = c;
            return "factor:" + j.dump();
        }
    }
    return "?";
}

std::vector<Verdict> apply_removal_rule(const std::vector<double>& values, const RemovalRule& rule) {
    std::vector<Verdict> out(values.size(), Verdict::keep);
    if (values.empty()) return out;
    switch (rule.kind) {
        case RemovalRule::Kind::above_mean: {
            const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
            for (std::size_t i = 0; i < values.size(); ++i)
                if (values[i] > mean + rule.tolerance) out[i] = Verdict::remove;
            break;
        }
        case RemovalRule::Kind::top_k: {
            std::vector<std::size_t> order(values.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
            for (std::size_t i = 0; i < std::min(rule.k, order.size()); ++i) out[order[i]] = Verdict::remove;
            break;
        }
        case RemovalRule::Kind::factor: {
            std::vector<double> sorted = values;
            std::sort(sorted.begin(), sorted.end());
            const std::size_t m = sorted.size();
            const double median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
            for (std::size_t i = 0; i < m; ++i)
                if (values[i] > rule.c * median) out[i] = Verdict::remove;
            break;
        }
    }
    return out;
}

ScreenConfig::ScreenConfig() {
    train.batch_size = 16;
    train.learning_rate = 1e-2;
    train.iterations = 2000;
    train.loss_record_stride = 10;
}

void ScreenConfig::validate() const {
    train.validate();
    criterion.validate();
    if (hidden_size < 1) throw ConfigError("screen: hidden_size must be >= 1");
    if (repeats < 1) throw ConfigError("screen: repeats must be >= 1");
    if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) throw ConfigError("screen: label_smoothing must lie in [0, 1)");
}

std::vector<BandInterval> ConvergenceReport::kept() const {
    std::vector<BandInterval> out;
    for (const auto& iv : intervals)
        if (iv.verdict == Verdict::keep) out.push_back(iv.interval);
    return out;
}

std::vector<BandInterval> ConvergenceReport::removed() const {
    std::vector<BandInterval> out;
    for (const auto& iv : intervals)
        if (iv.verdict == Verdict::remove) out.push_back(iv.interval);
    return out;
}

std::vector<std::size_t> ConvergenceReport::removed_positions() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < intervals.size(); ++k)
        if (intervals[k].verdict == Verdict::remove) out.push_back(k + 1);
    return out;
}

nn::Dataset interval_dataset(const std::vector<SeedROI>& rois, const BandInterval& interval) {
    nn::Dataset data;
    for (const auto& roi : rois) {
        check_interval(interval, roi.stack.bands());
        for (std::size_t b = interval.start; b <= interval.end; ++b) {
            data.samples.push_back(roi.stack.band_image(b - 1));
            data.labels.push_back(roi.class_index());
        }
    }
    return data;
}

ConvergenceReport screen_intervals(const std::vector<SeedROI>& rois, const std::vector<BandInterval>& intervals,
                                   const ScreenConfig& config) {
    config.validate();
    if (rois.empty()) throw ConfigError("screen: no ROIs");
    if (intervals.empty()) throw ConfigError("screen: no intervals");

    std::vector<nn::Dataset> datasets;
    for (const auto& iv : intervals) {
        datasets.push_back(interval_dataset(rois, iv));
        if (datasets.back().size() < static_cast<std::size_t>(config.train.batch_size)) {
            throw ConfigError("screen: interval " + iv.label() + " has " + std::to_string(datasets.back().size()) +
                              " samples, fewer than the batch size " + std::to_string(config.train.batch_size));
        }
        nn::check_two_classes(datasets.back());
    }

    const std::size_t n_iv = intervals.size();
    const std::size_t reps = config.repeats;
    std::vector<nn::LossCurve> curves(n_iv * reps);
    std::vector<double> accs(n_iv * reps);
    parallel_for(n_iv * reps, config.threads, [&](std::size_t job) {
        const std::size_t k = job / reps, r = job % reps;
        const auto& data = datasets[k];
        nn::LstmShape shape;
        shape.input_size = data.samples.front().cols;
        shape.hidden_size = config.hidden_size;
        shape.candidate = config.candidate;
        shape.label_smoothing = config.label_smoothing;
        nn::TrainConfig tc = config.train;
        tc.rng_seed = derive_seed(config.train.rng_seed, "screen", {k, r});
        auto result = nn::train_classifier<nn::LstmModel>(shape, data, tc);
        curves[job] = std::move(result.curve);
        accs[job] = result.train_accuracy;
    });

    ConvergenceReport report;
    report.rule = config.rule;
    report.repeats = reps;
    report.iteration_budget = config.train.iterations;
    std::vector<double> means;
    for (std::size_t k = 0; k < n_iv; ++k) {
        IntervalConvergence ic;
        ic.interval = intervals[k];
        double sum = 0.0, acc = 0.0;
        for (std::size_t r = 0; r < reps; ++r) {
            const auto& curve = curves[k * reps + r];
            ic.iterations.push_back(convergence_iteration(curve, config.criterion));
            ic.curves.push_back(curve);
            sum += static_cast<double>(ic.iterations.back());
            acc += accs[k * reps + r];
        }
        ic.mean_iteration = std::lround(sum / static_cast<double>(reps));
        ic.train_accuracy = acc / static_cast<double>(reps);
        means.push_back(static_cast<double>(ic.mean_iteration));
        report.intervals.push_back(std::move(ic));
    }
    const auto verdicts = apply_removal_rule(means, config.rule);
    for (std::size_t k = 0; k < n_iv; ++k) report.intervals[k].verdict = verdicts[k];
    return report;
}

nlohmann::json to_json(const ConvergenceCriterion& c) {
    return {{"window", c.window}, {"rel_eps", c.rel_eps}, {"patience", c.patience}};
}

ConvergenceCriterion criterion_from_json(const nlohmann::json& j) {
    ConvergenceCriterion c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "window") c.window = value.get<std::size_t>();
            else if (key == "rel_eps") c.rel_eps = value.get<double>();
            else if (key == "patience") c.patience = value.get<std::size_t>();
            else throw ConfigError("convergence criterion: unknown key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("convergence criterion: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json to_json(const ScreenConfig& c) {
    return {{"train", nn::to_json(c.train)},
            {"hidden_size", c.hidden_size},
            {"candidate", c.candidate == nn::CandidateActivation::sigmoid ? "sigmoid" : "tanh"},
            {"label_smoothing", c.label_smoothing},
            {"criterion", to_json(c.criterion)},
            {"repeats", c.repeats},
            {"rule", c.rule.name()},
            {"rule_tolerance", c.rule.tolerance}};
}

ScreenConfig screen_config_from_json(const nlohmann::json& j) {
    ScreenConfig c;
    if (!j.is_object()) throw ConfigError("screen config must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "train") c.train = nn::train_config_from_json(value, c.train);
            else if (key == "hidden_size") c.hidden_size = value.get<std::size_t>();
            else if (key == "candidate") {
                const auto s = value.get<std::string>();
                if (s == "sigmoid") c.candidate = nn::CandidateActivation::sigmoid;
                else if (s == "tanh") c.candidate = nn::CandidateActivation::tanh;
                else throw ConfigError("screen config: candidate must be sigmoid or tanh");
            } else if (key == "label_smoothing") c.label_smoothing = value.get<double>();
            else if (key == "criterion") c.criterion = criterion_from_json(value);
            else if (key == "repeats") c.repeats = value.get<std::size_t>();
            else if (key == "rule") {
                const double tol = c.rule.tolerance;
                c.rule = RemovalRule::parse(value.get<std::string>());
                c.rule.tolerance = tol;
            } else if (key == "rule_tolerance") c.rule.tolerance = value.get<double>();
            else throw ConfigError("screen config: unknown key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("screen config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json to_json(const ConvergenceReport& report) {
    nlohmann::json ivs = nlohmann::json::array();
    for (std::size_t k = 0; k < report.intervals.size(); ++k) {
        const auto& ic = report.intervals[k];
        ivs.push_back({{"index", k + 1},
                       {"interval", ic.interval.label()},
                       {"iterations", ic.iterations},
                       {"mean_iteration", ic.mean_iteration},
                       {"train_accuracy", ic.train_accuracy},
                       {"verdict", to_string(ic.verdict)}});
    }
    return {{"rule", report.rule.name()},
            {"repeats", report.repeats},
            {"iteration_budget", report.iteration_budget},
            {"intervals", ivs}};
}

void write_curves_csv(const ConvergenceReport& report, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path);
    os.precision(17);
    os << "interval,repeat,iteration,loss\n";
    for (const auto& ic : report.intervals)
        for (std::size_t r = 0; r < ic.curves.size(); ++r)
            for (std::size_t i = 0; i < ic.curves[r].size(); ++i)
                os << ic.interval.label() << ',' << r + 1 << ',' << ic.curves[r].iterations[i] << ','
                   << ic.curves[r].losses[i] << '\n';
    if (!os) throw Error("failed writing " + path);
}

}  // namespace hsi
