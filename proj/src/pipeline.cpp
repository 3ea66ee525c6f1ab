#include "hsi/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <functional>

#include "hsi/error.hpp"
#include "hsi/nn/checkpoint.hpp"
#include "hsi/rng.hpp"

namespace hsi {

namespace fs = std::filesystem;
using nlohmann::json;

Segmentation segment_seeds(const HyperCube& cube, const std::vector<SeedClass>& labels,
                           const SegmentOptions& options) {
    if (options.band < 1 || options.band > cube.bands()) {
        throw ConfigError("segment: reference band " + std::to_string(options.band) + " outside 1.." +
                          std::to_string(cube.bands()));
    }
    if (options.target < 1) throw ConfigError("segment: target size must be >= 1");
    const Image ref = cube.band_image(options.band - 1);
    Segmentation seg;
    seg.threshold = estimate_background_threshold(ref, options.margin, options.percentile);
    seg.mask = binarize(ref, seg.threshold);
    seg.boxes = extract_bounding_boxes(seg.mask, options.min_area);
    if (labels.size() != seg.boxes.size()) {
        throw ConfigError("segment: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(seg.boxes.size()) + " detected seeds");
    }
    seg.rois = extract_rois(cube, seg.boxes, seg.mask, labels, options.target);
    return seg;
}

// ---------------------------------------------------------------- config

void PipelineConfig::validate() const {
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (interval_count < 1) throw ConfigError("intervals must be >= 1");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
    screen.validate();
    scan.validate();
    final_stage.validate();
    if (split.train_per_class < 1) throw ConfigError("split: train_per_class must be >= 1");
    auto check_source = [](const DataSource& s, const std::string& what) {
        auto need = [&](const fs::path& p, const std::string& name) {
            if (p.empty()) throw ConfigError(what + ": missing '" + name + "' path");
            if (!fs::exists(p)) throw ConfigError(what + ": " + name + " path does not exist: " + p.string());
        };
        switch (s.kind) {
            case DataSource::Kind::rois: need(s.dir, "dir"); break;
            case DataSource::Kind::raw:
                need(s.raw, "raw");
                need(s.dark, "dark");
                need(s.white, "white");
                need(s.labels, "labels");
                if (s.segmentation.band < 1) throw ConfigError(what + ": segmentation band must be >= 1");
                if (s.segmentation.target < 1) throw ConfigError(what + ": segmentation target must be >= 1");
                break;
            case DataSource::Kind::synthetic:
            case DataSource::Kind::synthetic_scene: {
                SynthSpec spec = s.spec;
                spec.validate();
                break;
            }
        }
    };
    check_source(input, "input");
    if (verification) check_source(*verification, "verification");
}

namespace {

std::string kind_name(DataSource::Kind k) {
    switch (k) {
        case DataSource::Kind::synthetic: return "synthetic";
        case DataSource::Kind::synthetic_scene: return "synthetic_scene";
        case DataSource::Kind::rois: return "rois";
        case DataSource::Kind::raw: return "raw";
    }
    return "?";
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    if (path.is_absolute() || base.empty()) return path;
    return base / path;
}

SegmentOptions segment_options_from_json(const json& j, SegmentOptions o) {
    if (!j.is_object()) throw ConfigError("segmentation must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "band") o.band = value.get<std::size_t>();
        else if (key == "margin") o.margin = value.get<std::size_t>();
        else if (key == "percentile") o.percentile = value.get<double>();
        else if (key == "target") o.target = value.get<std::size_t>();
        else if (key == "min_area") o.min_area = value.get<std::size_t>();
        else throw ConfigError("segmentation: unknown key '" + key + "'");
    }
    return o;
}

json to_json(const SegmentOptions& o) {
    return {{"band", o.band},
            {"margin", o.margin},
            {"percentile", o.percentile},
            {"target", o.target},
            {"min_area", o.min_area}};
}

DataSource data_source_from_json(const json& j, const fs::path& base, const std::string& what) {
    if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
    DataSource s;
    const std::string kind = j.value("kind", std::string("synthetic"));
    if (kind == "synthetic") s.kind = DataSource::Kind::synthetic;
    else if (kind == "synthetic_scene") s.kind = DataSource::Kind::synthetic_scene;
    else if (kind == "rois") s.kind = DataSource::Kind::rois;
    else if (kind == "raw") s.kind = DataSource::Kind::raw;
    else throw ConfigError(what + ": unknown kind '" + kind + "'");
    for (const auto& [key, value] : j.items()) {
        if (key == "kind") continue;
        if (key == "spec") s.spec = synth_spec_from_json(value);
        else if (key == "dir") s.dir = resolve(base, value.get<std::string>());
        else if (key == "raw") s.raw = resolve(base, value.get<std::string>());
        else if (key == "dark") s.dark = resolve(base, value.get<std::string>());
        else if (key == "white") s.white = resolve(base, value.get<std::string>());
        else if (key == "labels") s.labels = resolve(base, value.get<std::string>());
        else if (key == "format") {
            const auto f = value.get<std::string>();
            if (f == "native") s.format = CubeFormat::native;
            else if (f == "flat_csv") s.format = CubeFormat::flat_csv;
            else throw ConfigError(what + ": format must be native or flat_csv");
        } else if (key == "segmentation") s.segmentation = segment_options_from_json(value, s.segmentation);
        else throw ConfigError(what + ": unknown key '" + key + "'");
    }
    return s;
}

// Nested screen/scan sections carry an extra "enabled" flag.
std::pair<bool, json> split_enabled(const json& j, const std::string& what) {
    if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
    json rest = j;
    bool enabled = true;
    if (rest.contains("enabled")) {
        enabled = rest["enabled"].get<bool>();
        rest.erase("enabled");
    }
    return {enabled, rest};
}

ScanConfig default_final_config() {
    ScanConfig c;
    c.train.iterations = 400;
    return c;
}

}  // namespace

json to_json(const DataSource& s) {
    json j{{"kind", kind_name(s.kind)}};
    switch (s.kind) {
        case DataSource::Kind::synthetic: j["spec"] = to_json(s.spec); break;
        case DataSource::Kind::synthetic_scene:
            j["spec"] = to_json(s.spec);
            j["segmentation"] = to_json(s.segmentation);
            break;
        case DataSource::Kind::rois: j["dir"] = s.dir.generic_string(); break;
        case DataSource::Kind::raw:
            j["raw"] = s.raw.generic_string();
            j["dark"] = s.dark.generic_string();
            j["white"] = s.white.generic_string();
            j["labels"] = s.labels.generic_string();
            j["format"] = s.format == CubeFormat::native ? "native" : "flat_csv";
            j["segmentation"] = to_json(s.segmentation);
            break;
    }
    return j;
}

PipelineConfig pipeline_config_from_json(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
    PipelineConfig c;
    c.final_stage = default_final_config();
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "out_dir") c.out_dir = resolve(base_dir, value.get<std::string>());
            else if (key == "threads") c.threads = value.get<int>();
            else if (key == "input") c.input = data_source_from_json(value, base_dir, "input");
            else if (key == "intervals") c.interval_count = value.get<std::size_t>();
            else if (key == "screen") {
                auto [enabled, rest] = split_enabled(value, "screen");
                c.screen_enabled = enabled;
                c.screen = screen_config_from_json(rest);
            } else if (key == "scan") {
                auto [enabled, rest] = split_enabled(value, "scan");
                c.scan_enabled = enabled;
                c.scan = scan_config_from_json(rest);
            } else if (key == "final") {
                ScanConfig f = default_final_config();
                if (!value.is_object()) throw ConfigError("final must be a JSON object");
                for (const auto& [k2, v2] : value.items()) {
                    if (k2 == "train") f.train = nn::train_config_from_json(v2, f.train);
                    else if (k2 == "network") f.shape = nn::cnn_shape_from_json(v2);
                    else throw ConfigError("final: unknown key '" + k2 + "'");
                }
                c.final_stage = f;
            } else if (key == "split") {
                for (const auto& [k2, v2] : value.items()) {
                    if (k2 == "train_per_class") c.split.train_per_class = v2.get<std::size_t>();
                    else throw ConfigError("split: unknown key '" + k2 + "'");
                }
            } else if (key == "threshold") c.threshold = value.get<double>();
            else if (key == "verification") {
                if (!value.is_null()) c.verification = data_source_from_json(value, base_dir, "verification");
            } else throw ConfigError("pipeline config: unknown key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("pipeline config: ") + e.what());
    }
    c.scan.threshold = c.threshold;
    c.final_stage.threshold = c.threshold;
    return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config " + path.string());
    json j;
    try {
        j = json::parse(is);
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return pipeline_config_from_json(j, path.parent_path());
}

json to_json(const PipelineConfig& c) {
    json screen = to_json(c.screen);
    screen["enabled"] = c.screen_enabled;
    json scan = to_json(c.scan);
    scan.erase("threshold");
    scan["enabled"] = c.scan_enabled;
    json j{{"seed", c.seed},
           {"out_dir", c.out_dir.generic_string()},
           {"input", to_json(c.input)},
           {"intervals", c.interval_count},
           {"screen", screen},
           {"scan", scan},
           {"final", {{"train", nn::to_json(c.final_stage.train)}, {"network", nn::to_json(c.final_stage.shape)}}},
           {"split", {{"train_per_class", c.split.train_per_class}}},
           {"threshold", c.threshold}};
    j["verification"] = c.verification ? to_json(*c.verification) : json(nullptr);
    return j;
}

// ---------------------------------------------------------------- stages

ScanOutcome run_scan(const std::vector<SeedROI>& rois, const std::vector<BandInterval>& kept, const Split& split,
                     const ScanConfig& config) {
    if (kept.empty()) throw ConfigError("scan: no surviving intervals");
    ScanOutcome out{.training = train_scan_cnn(rois, kept, split, config)};
    const auto bands = bands_of(kept);
    out.profile = per_band_accuracy(out.training.model, rois, split.test_ids, bands, config.threads);
    std::size_t correct = 0;
    const double n_test = static_cast<double>(split.test_ids.size());
    for (const auto& iv : kept) {
        const auto sub = restrict_profile(out.profile, iv);
        out.interval_stats.push_back({iv, profile_stats(sub, config.threshold)});
    }
    for (double a : out.profile.accuracy) correct += static_cast<std::size_t>(std::lround(a * n_test));
    out.baseline_accuracy = static_cast<double>(correct) / (n_test * static_cast<double>(bands.size()));
    out.selected = select_dense_interval(out.interval_stats);
    return out;
}

RetrainOutcome retrain(const std::vector<SeedROI>& rois, const std::vector<BandInterval>& band_set,
                       const Split& split, const ScanConfig& config, std::uint64_t top_seed) {
    RetrainOutcome out{.training = train_scan_cnn(rois, band_set, split, config)};
    const auto bands = bands_of(band_set);
    out.profile = per_band_accuracy(out.training.model, rois, split.test_ids, bands, config.threads);
    if (band_set.size() == 1) out.profile.interval_label = band_set.front().label();
    out.stats = profile_stats(out.profile, config.threshold);
    std::size_t correct = 0;
    const double n_test = static_cast<double>(split.test_ids.size());
    for (double a : out.profile.accuracy) correct += static_cast<std::size_t>(std::lround(a * n_test));
    out.accuracy = static_cast<double>(correct) / (n_test * static_cast<double>(bands.size()));
    out.top_bands = select_top_bands(out.profile, config.threshold);
    if (!out.top_bands.empty()) {
        std::vector<BandInterval> top;
        for (std::size_t b : out.top_bands) top.push_back({b, b});
        ScanConfig top_config = config;
        top_config.train.rng_seed = top_seed;
        const auto top_training = train_scan_cnn(rois, top, split, top_config);
        out.top_band_accuracy =
            pooled_accuracy(top_training.model, rois, split.test_ids, out.top_bands, config.threads);
    }
    return out;
}

RetrainOutcome verify_transfer(const std::vector<BandInterval>& bands, const std::vector<SeedROI>& rois,
                               const Split& split, const ScanConfig& config, std::uint64_t top_seed) {
    if (rois.empty()) throw ConfigError("verify: no verification seeds");
    for (const auto& iv : bands) check_interval(iv, rois.front().stack.bands());
    return retrain(rois, bands, split, config, top_seed);
}

LoadedData load_data(const DataSource& source, std::uint64_t seed, const std::optional<fs::path>& calibrated_path) {
    LoadedData out;
    auto finish_cube = [&](const HyperCube& cube, const std::vector<SeedClass>& labels, SegmentOptions opts) {
        if (calibrated_path) save_cube(cube, *calibrated_path);
        out.calibrated_here = true;
        auto seg = segment_seeds(cube, labels, opts);
        out.rois = std::move(seg.rois);
        seg.rois.clear();
        out.segmentation = std::move(seg);
    };
    switch (source.kind) {
        case DataSource::Kind::synthetic: {
            SynthSpec spec = source.spec;
            spec.rng_seed = seed;
            auto data = generate_synthetic_dataset(spec);
            out.rois = std::move(data.rois);
            out.truth = std::move(data.truth);
            break;
        }
        case DataSource::Kind::synthetic_scene: {
            SynthSpec spec = source.spec;
            spec.rng_seed = seed;
            spec.validate();
            const RawScene scene = generate_raw_cube(spec);
            SegmentOptions opts = source.segmentation;
            if (opts.band == 0) opts.band = scene.reference_band;
            if (opts.target == 0) opts.target = spec.image_size;
            finish_cube(calibrate(scene.raw, scene.frames), scene.labels, opts);
            auto truth = generate_noiseless_dataset(spec).truth;
            truth.labels = scene.labels;
            out.truth = std::move(truth);
            break;
        }
        case DataSource::Kind::rois: out.rois = load_roi_dir(source.dir); break;
        case DataSource::Kind::raw: {
            const HyperCube raw = load_cube(source.raw, source.format);
            CalibrationFrames frames{load_cube(source.dark, source.format), load_cube(source.white, source.format)};
            const HyperCube cube = calibrate(raw, frames);
            SegmentOptions opts = source.segmentation;
            const Image ref = cube.band_image(std::min(opts.band, cube.bands()) - 1);
            const auto boxes = extract_bounding_boxes(
                binarize(ref, estimate_background_threshold(ref, opts.margin, opts.percentile)), opts.min_area);
            finish_cube(cube, load_labels(source.labels, boxes.size()), opts);
            break;
        }
    }
    if (out.rois.empty()) throw ConfigError("no seeds in " + kind_name(source.kind) + " input");
    out.band_count = out.rois.front().stack.bands();
    out.wavelengths = out.rois.front().stack.wavelengths();
    return out;
}

// ---------------------------------------------------------------- report

namespace {

json labels_of(const std::vector<BandInterval>& ivs) {
    json a = json::array();
    for (const auto& iv : ivs) a.push_back(iv.label());
    return a;
}

json to_json(const IntervalStats& s) {
    json j = hsi::to_json(s.stats);
    j["interval"] = s.interval.label();
    return j;
}

json to_json(const RetrainOutcome& r) {
    json j{{"profile", hsi::to_json(r.profile)},
           {"stats", hsi::to_json(r.stats)},
           {"accuracy", r.accuracy},
           {"train_accuracy", r.training.train_accuracy},
           {"top_bands", r.top_bands}};
    j["top_band_accuracy"] = r.top_band_accuracy ? json(*r.top_band_accuracy) : json(nullptr);
    return j;
}

void write_json(const json& j, const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path.string());
    os << j.dump(2) << '\n';
    if (!os) throw Error("failed writing " + path.string());
}

}  // namespace

json to_json(const FinalReport& r) {
    json stages = json::array();
    for (const auto& s : r.stages) {
        json e{{"name", s.name}, {"status", s.status}};
        if (!s.note.empty()) e["note"] = s.note;
        stages.push_back(e);
    }
    json j{{"status", r.complete ? "complete" : "incomplete"}, {"stages", stages}};
    if (!r.complete) {
        j["failed_stage"] = r.failed_stage;
        j["error"] = r.error;
    }
    j["config"] = r.config;
    j["seeds"] = r.seeds;
    j["data"] = r.data;
    j["partition"] = labels_of(r.partition);
    j["screen"] = r.screen ? to_json(*r.screen) : json(nullptr);
    j["kept_intervals"] = labels_of(r.kept);
    j["removed_intervals"] = labels_of(r.removed);
    j["split"] = to_json(r.split);
    if (r.scan) {
        json stats = json::array();
        for (const auto& s : r.scan->interval_stats) stats.push_back(to_json(s));
        j["scan"] = {{"profile", to_json(r.scan->profile)},
                     {"interval_stats", stats},
                     {"selected_interval", r.scan->selected.label()},
                     {"baseline_accuracy", r.scan->baseline_accuracy},
                     {"train_accuracy", r.scan->training.train_accuracy}};
    } else {
        j["scan"] = nullptr;
    }
    j["selected_bands"] = labels_of(r.selected);
    j["final"] = r.final_stage ? to_json(*r.final_stage) : json(nullptr);
    if (r.final_stage) {
        j["final_accuracy"] = r.final_stage->accuracy;
        if (r.scan) j["gain_over_baseline"] = r.final_stage->accuracy - r.scan->baseline_accuracy;
    }
    j["verification"] = r.verification ? to_json(*r.verification) : json(nullptr);
    j["profile_correlation"] = r.profile_correlation ? json(*r.profile_correlation) : json(nullptr);
    j["reference_verification"] = {{"mean", 0.8704},
                                   {"max", 0.93},
                                   {"std", 0.049361639},
                                   {"count_ge_threshold", 18},
                                   {"profile_correlation", 0.433875},
                                   {"top_band_accuracy", 0.93}};
    j["notes"] = {"the band scan and the final retrain share one train/test split",
                  "top bands are pooled into one training set, not ensembled",
                  "iterations count minibatches; LSTM time steps are image rows"};
    return j;
}

FinalReport run_pipeline(const PipelineConfig& config_in) {
    PipelineConfig config = config_in;
    config.validate();
    const fs::path out = config.out_dir;
    fs::create_directories(out);

    FinalReport rep;
    rep.config = to_json(config);
    const std::uint64_t s = config.seed;
    rep.seeds = {{"base", s},
                 {"synth", derive_seed(s, "synth")},
                 {"screen", derive_seed(s, "screen")},
                 {"split", derive_seed(s, "split")},
                 {"scan", derive_seed(s, "scan")},
                 {"final", derive_seed(s, "final")},
                 {"top", derive_seed(s, "top")}};
    if (config.verification) {
        rep.seeds["verify_synth"] = derive_seed(s, "verify.synth");
        rep.seeds["verify_split"] = derive_seed(s, "verify.split");
        rep.seeds["verify"] = derive_seed(s, "verify");
        rep.seeds["verify_top"] = derive_seed(s, "verify.top");
    }
    for (const char* name : {"calibrate", "segment", "screen", "scan", "final", "verify"})
        rep.stages.push_back({name, "not_run", ""});
    auto set_stage = [&](const std::string& name, const std::string& status, const std::string& note = "") {
        for (auto& st : rep.stages)
            if (st.name == name) {
                st.status = status;
                st.note = note;
            }
    };
    auto write_report = [&] { write_json(to_json(rep), out / "report.json"); };
    auto stage = [&](const std::string& name, const std::function<void()>& body) {
        try {
            body();
            set_stage(name, "done");
        } catch (const std::exception& e) {
            set_stage(name, "failed", e.what());
            rep.complete = false;
            rep.failed_stage = name;
            rep.error = e.what();
            write_report();
            throw StageError(name, e.what());
        }
    };

    // 1-2: calibrate and segment (or generate / load ROIs).
    LoadedData data;
    const auto kind = config.input.kind;
    const bool from_cube = kind == DataSource::Kind::raw || kind == DataSource::Kind::synthetic_scene;
    if (from_cube) {
        stage("calibrate", [&] { data = load_data(config.input, derive_seed(s, "synth"), out / "calibrated.cube"); });
        stage("segment", [&] {
            fs::remove_all(out / "rois");
            save_roi_dir(data.rois, out / "rois");
            const auto& seg = *data.segmentation;
            json boxes = json::array();
            for (const auto& b : seg.boxes) boxes.push_back({b.row_min, b.row_max, b.col_min, b.col_max});
            write_json({{"threshold", seg.threshold}, {"boxes", boxes}, {"seeds", data.rois.size()}},
                       out / "segmentation.json");
        });
    } else {
        set_stage("calibrate", "skipped", "input is " + kind_name(kind) + " ROIs");
        stage("segment", [&] {
            data = load_data(config.input, derive_seed(s, "synth"));
            if (kind == DataSource::Kind::synthetic) {
                fs::remove_all(out / "rois");
                save_roi_dir(data.rois, out / "rois");
            }
        });
        set_stage("segment", "skipped", "input is " + kind_name(kind) + " ROIs");
    }
    rep.data = {{"seeds", data.rois.size()}, {"band_count", data.band_count}};
    if (data.truth) {
        rep.data["ground_truth"] = to_json(*data.truth);
        write_json(to_json(*data.truth), out / "ground_truth.json");
    }

    // 3: screen.
    stage("screen", [&] {
        rep.partition = partition_bands(data.band_count, config.interval_count);
        if (!config.screen_enabled || rep.partition.size() == 1) {
            rep.kept = rep.partition;
            return;
        }
        ScreenConfig sc = config.screen;
        sc.train.rng_seed = derive_seed(s, "screen");
        sc.threads = config.threads;
        rep.screen = screen_intervals(data.rois, rep.partition, sc);
        rep.kept = rep.screen->kept();
        rep.removed = rep.screen->removed();
        write_json(to_json(*rep.screen), out / "screen.json");
        write_curves_csv(*rep.screen, (out / "screen_curves.csv").string());
    });
    if (!rep.screen) {
        set_stage("screen", "skipped",
                  config.screen_enabled ? "single interval" : "screening disabled in config");
    }

    // 4: scan over the surviving bands.
    stage("scan", [&] {
        rep.split = split_dataset(data.rois, {config.split.train_per_class, derive_seed(s, "split")});
        write_json(to_json(rep.split), out / "split.json");
        if (!config.scan_enabled || rep.kept.size() == 1) {
            rep.selected = rep.kept;
            return;
        }
        ScanConfig sc = config.scan;
        sc.train.rng_seed = derive_seed(s, "scan");
        sc.threads = config.threads;
        rep.scan = run_scan(data.rois, rep.kept, rep.split, sc);
        rep.selected = {rep.scan->selected};
        json stats = json::array();
        for (const auto& st : rep.scan->interval_stats) stats.push_back(to_json(st));
        write_json({{"profile", to_json(rep.scan->profile)},
                    {"interval_stats", stats},
                    {"selected_interval", rep.scan->selected.label()},
                    {"baseline_accuracy", rep.scan->baseline_accuracy}},
                   out / "scan.json");
        write_profile_csv(rep.scan->profile, data.wavelengths, out / "scan_profile.csv");
        nn::save_model(rep.scan->training.model, out / "scan_model.ckpt");
    });
    if (!rep.scan) {
        set_stage("scan", "skipped", config.scan_enabled ? "single surviving interval" : "scan disabled in config");
    }

    // 5: reinitialized CNN on the selected bands.
    stage("final", [&] {
        ScanConfig fc = config.final_stage;
        fc.train.rng_seed = derive_seed(s, "final");
        fc.threads = config.threads;
        rep.final_stage = retrain(data.rois, rep.selected, rep.split, fc, derive_seed(s, "top"));
        write_json(to_json(*rep.final_stage), out / "final.json");
        write_profile_csv(rep.final_stage->profile, data.wavelengths, out / "final_profile.csv");
        nn::save_model(rep.final_stage->training.model, out / "final_model.ckpt");
    });

    // 6: verification on a second set of seeds.
    if (config.verification) {
        stage("verify", [&] {
            const LoadedData vdata = load_data(*config.verification, derive_seed(s, "verify.synth"));
            const Split vsplit =
                split_dataset(vdata.rois, {config.split.train_per_class, derive_seed(s, "verify.split")});
            ScanConfig vc = config.final_stage;
            vc.train.rng_seed = derive_seed(s, "verify");
            vc.threads = config.threads;
            rep.verification = verify_transfer(rep.selected, vdata.rois, vsplit, vc, derive_seed(s, "verify.top"));
            const auto& a = rep.final_stage->profile.accuracy;
            const auto& b = rep.verification->profile.accuracy;
            try {
                rep.profile_correlation = pearson_corr(a, b);
            } catch (const ShapeError&) {
                rep.profile_correlation.reset();  // a constant profile has no correlation
            }
            json v = to_json(*rep.verification);
            v["split"] = to_json(vsplit);
            v["profile_correlation"] = rep.profile_correlation ? json(*rep.profile_correlation) : json(nullptr);
            write_json(v, out / "verification.json");
            write_profile_csv(rep.verification->profile, vdata.wavelengths, out / "verification_profile.csv");
        });
    } else {
        set_stage("verify", "skipped", "no verification data configured");
    }

    rep.complete = true;
    write_report();
    return rep;
}

}  // namespace hsi
