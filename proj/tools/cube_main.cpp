// cube: command-line front end for the hyperspectral seed pipeline.
//
// Exit codes: 0 success, 2 configuration error, 3 stage failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hsi/band_scan.hpp"
#include "hsi/error.hpp"
#include "hsi/hypercube.hpp"
#include "hsi/nn/checkpoint.hpp"
#include "hsi/pipeline.hpp"
#include "hsi/rng.hpp"
#include "hsi/screen.hpp"
#include "hsi/segmentation.hpp"
#include "hsi/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hsi;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::optional<int> threads;
};

PipelineConfig effective_config(const Globals& g) {
    PipelineConfig c;
    if (!g.config.empty()) c = load_pipeline_config(g.config);
    if (g.seed) c.seed = *g.seed;
    if (!g.out_dir.empty()) c.out_dir = g.out_dir;
    if (g.threads) c.threads = *g.threads;
    if (c.threads < 1) throw ConfigError("--threads must be >= 1");
    return c;
}

fs::path out_path(const PipelineConfig& c, const std::string& given, const std::string& fallback) {
    if (!given.empty()) return given;
    fs::create_directories(c.out_dir);
    return c.out_dir / fallback;
}

void write_json(const json& j, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path.string());
    os << j.dump(2) << '\n';
}

std::vector<SeedROI> load_rois(const std::string& dir) {
    if (dir.empty()) throw ConfigError("--rois is required");
    if (!fs::is_directory(dir)) throw ConfigError("ROI directory does not exist: " + dir);
    auto rois = load_roi_dir(dir);
    if (rois.empty()) throw ConfigError("no seed_*.cube files in " + dir);
    return rois;
}

json retrain_json(const RetrainOutcome& r) {
    json j{{"profile", to_json(r.profile)},
           {"stats", to_json(r.stats)},
           {"accuracy", r.accuracy},
           {"train_accuracy", r.training.train_accuracy},
           {"top_bands", r.top_bands}};
    j["top_band_accuracy"] = r.top_band_accuracy ? json(*r.top_band_accuracy) : json(nullptr);
    return j;
}

std::vector<double> read_profile_accuracy(const fs::path& path, const std::vector<std::size_t>& bands) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read reference profile " + path.string());
    std::string line;
    std::getline(is, line);
    std::map<std::size_t, double> by_band;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.rfind(',');
        if (c1 == std::string::npos || c2 == c1) throw FormatError("bad profile line: " + line);
        by_band[std::stoul(line.substr(0, c1))] = std::stod(line.substr(c2 + 1));
    }
    std::vector<double> out;
    for (std::size_t b : bands) {
        auto it = by_band.find(b);
        if (it == by_band.end()) throw ConfigError("reference profile lacks band " + std::to_string(b));
        out.push_back(it->second);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hyperspectral seed classification: calibration, segmentation, band screening and scanning"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "Pipeline config JSON");
    app.add_option("--seed", g.seed, "Base seed");
    app.add_option("--out-dir", g.out_dir, "Output directory");
    app.add_option("--threads", g.threads, "Worker threads");

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "Convert raw counts to reflectance with dark/white references");
    std::string cal_raw, cal_dark, cal_white, cal_out, cal_format = "native";
    cal->add_option("--raw", cal_raw)->required();
    cal->add_option("--dark", cal_dark)->required();
    cal->add_option("--white", cal_white)->required();
    cal->add_option("--out", cal_out)->required();
    cal->add_option("--format", cal_format, "native or flat_csv")->check(CLI::IsMember({"native", "flat_csv"}));

    // segment
    auto* seg = app.add_subcommand("segment", "Cut per-seed ROIs out of a calibrated cube");
    std::string seg_cube, seg_labels;
    SegmentOptions seg_opts;
    seg->add_option("--cube", seg_cube)->required();
    seg->add_option("--band", seg_opts.band, "Reference band (1-based)");
    seg->add_option("--margin", seg_opts.margin, "Border ring width for the background threshold");
    seg->add_option("--percentile", seg_opts.percentile, "Ring percentile used as threshold (1 = max)");
    seg->add_option("--target", seg_opts.target, "ROI side length");
    seg->add_option("--min-area", seg_opts.min_area, "Smallest component kept");
    seg->add_option("--labels", seg_labels, "seed_index,label file")->required();

    // synth
    auto* syn = app.add_subcommand("synth", "Generate a synthetic labelled dataset");
    std::string syn_spec;
    bool syn_scene = false;
    syn->add_option("--spec", syn_spec, "SynthSpec JSON");
    syn->add_flag("--scene", syn_scene, "Also write a raw scene with dark/white references and labels");

    // screen
    auto* scr = app.add_subcommand("screen", "LSTM noise screen over band intervals");
    std::string scr_rois, scr_rule, scr_report, scr_curves;
    std::optional<std::size_t> scr_intervals, scr_repeats;
    scr->add_option("--rois", scr_rois)->required();
    scr->add_option("--intervals", scr_intervals, "Number of equal band intervals");
    scr->add_option("--repeats", scr_repeats, "Trainings per interval");
    scr->add_option("--rule", scr_rule, "above-mean | top_k:K | factor:C");
    scr->add_option("--report", scr_report, "Convergence report JSON");
    scr->add_option("--curves", scr_curves, "Loss curves CSV");

    // scan
    auto* scn = app.add_subcommand("scan", "Train a CNN on a band set and profile it band by band");
    std::string scn_rois, scn_bands, scn_intervals_txt, scn_profile, scn_stats, scn_model;
    std::optional<std::uint64_t> scn_split_seed;
    scn->add_option("--rois", scn_rois)->required();
    scn->add_option("--bands", scn_bands, "Band set, e.g. 51-200 or 51-100,151-200")->required();
    scn->add_option("--intervals", scn_intervals_txt,
                    "Intervals compared by the dense-interval selection (default: the partition clipped to --bands)");
    scn->add_option("--split-seed", scn_split_seed);
    scn->add_option("--profile", scn_profile, "Per-band accuracy CSV");
    scn->add_option("--stats", scn_stats, "Interval statistics JSON");
    scn->add_option("--model", scn_model, "Checkpoint of the trained CNN");

    // train
    auto* trn = app.add_subcommand("train", "Retrain a fresh CNN on the selected bands and pool the top bands");
    std::string trn_rois, trn_bands, trn_profile, trn_report, trn_model;
    std::optional<std::uint64_t> trn_split_seed;
    trn->add_option("--rois", trn_rois)->required();
    trn->add_option("--bands", trn_bands)->required();
    trn->add_option("--split-seed", trn_split_seed);
    trn->add_option("--profile", trn_profile);
    trn->add_option("--report", trn_report);
    trn->add_option("--model", trn_model);

    // verify
    auto* ver = app.add_subcommand("verify", "Repeat the retrain on a second set of seeds");
    std::string ver_rois, ver_bands, ver_profile, ver_report, ver_reference;
    std::optional<std::uint64_t> ver_split_seed;
    ver->add_option("--rois", ver_rois)->required();
    ver->add_option("--bands", ver_bands)->required();
    ver->add_option("--split-seed", ver_split_seed);
    ver->add_option("--reference", ver_reference, "Profile CSV of the first data set, for the correlation");
    ver->add_option("--profile", ver_profile);
    ver->add_option("--report", ver_report);

    // run
    auto* run = app.add_subcommand("run", "Full pipeline from one config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        PipelineConfig cfg;
        try {
            cfg = effective_config(g);
            cfg.screen.threads = cfg.threads;
            cfg.scan.threads = cfg.threads;
            cfg.final_stage.threads = cfg.threads;
        } catch (const Error& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return kExitConfig;
        }

        if (*cal) {
            const auto fmt = cal_format == "flat_csv" ? CubeFormat::flat_csv : CubeFormat::native;
            const HyperCube raw = load_cube(cal_raw, fmt);
            CalibrationFrames frames{load_cube(cal_dark, fmt), load_cube(cal_white, fmt)};
            save_cube(calibrate(raw, frames), cal_out, fmt);
            std::cout << "calibrated " << raw.rows() << "x" << raw.cols() << "x" << raw.bands() << " -> " << cal_out
                      << '\n';
        } else if (*seg) {
            const HyperCube cube = load_cube(seg_cube);
            const Image ref = cube.band_image(std::min<std::size_t>(std::max<std::size_t>(seg_opts.band, 1), cube.bands()) - 1);
            const auto boxes = extract_bounding_boxes(
                binarize(ref, estimate_background_threshold(ref, seg_opts.margin, seg_opts.percentile)),
                seg_opts.min_area);
            const auto result = segment_seeds(cube, load_labels(seg_labels, boxes.size()), seg_opts);
            const fs::path dir = cfg.out_dir / "rois";
            fs::remove_all(dir);
            save_roi_dir(result.rois, dir);
            json jb = json::array();
            for (const auto& b : result.boxes) jb.push_back({b.row_min, b.row_max, b.col_min, b.col_max});
            write_json({{"threshold", result.threshold}, {"boxes", jb}, {"seeds", result.rois.size()}},
                       cfg.out_dir / "segmentation.json");
            std::cout << result.rois.size() << " seeds -> " << dir.string() << '\n';
        } else if (*syn) {
            SynthSpec spec = cfg.input.spec;
            if (!syn_spec.empty()) {
                std::ifstream is(syn_spec);
                if (!is) throw ConfigError("cannot read " + syn_spec);
                try {
                    spec = synth_spec_from_json(json::parse(is));
                } catch (const json::exception& e) {
                    throw ConfigError(syn_spec + ": " + e.what());
                }
            }
            if (g.seed) spec.rng_seed = *g.seed;
            spec.validate();
            const auto data = generate_synthetic_dataset(spec);
            const fs::path dir = cfg.out_dir;
            fs::create_directories(dir);
            fs::remove_all(dir / "rois");
            save_roi_dir(data.rois, dir / "rois");
            write_json(to_json(spec), dir / "spec.json");
            write_json(to_json(data.truth), dir / "ground_truth.json");
            if (syn_scene) {
                const RawScene scene = generate_raw_cube(spec);
                save_cube(scene.raw, dir / "raw.cube");
                save_cube(scene.frames.dark, dir / "dark.cube");
                save_cube(scene.frames.white, dir / "white.cube");
                std::ofstream labels(dir / "labels.csv");
                labels << "# seed_index,label\n";
                for (std::size_t i = 0; i < scene.labels.size(); ++i)
                    labels << i << ',' << to_string(scene.labels[i]) << '\n';
                std::cout << "scene reference band " << scene.reference_band << '\n';
            }
            std::cout << data.rois.size() << " seeds -> " << (dir / "rois").string() << '\n';
        } else if (*scr) {
            const auto rois = load_rois(scr_rois);
            ScreenConfig sc = cfg.screen;
            if (scr_repeats) sc.repeats = *scr_repeats;
            if (!scr_rule.empty()) {
                const double tol = sc.rule.tolerance;
                sc.rule = RemovalRule::parse(scr_rule);
                sc.rule.tolerance = tol;
            }
            sc.train.rng_seed = derive_seed(cfg.seed, "screen");
            sc.validate();
            const auto intervals =
                partition_bands(rois.front().stack.bands(), scr_intervals.value_or(cfg.interval_count));
            const auto report = screen_intervals(rois, intervals, sc);
            write_json(to_json(report), out_path(cfg, scr_report, "screen.json"));
            write_curves_csv(report, out_path(cfg, scr_curves, "screen_curves.csv").string());
            for (const auto& ic : report.intervals)
                std::cout << ic.interval.label() << "  mean iteration " << ic.mean_iteration << "  "
                          << to_string(ic.verdict) << '\n';
        } else if (*scn) {
            const auto rois = load_rois(scn_rois);
            const auto band_set = parse_interval_list(scn_bands);
            const std::size_t nb = rois.front().stack.bands();
            for (const auto& iv : band_set) check_interval(iv, nb);
            std::vector<BandInterval> groups;
            if (!scn_intervals_txt.empty()) {
                groups = parse_interval_list(scn_intervals_txt);
            } else {
                const auto bands = bands_of(band_set);
                for (const auto& iv : partition_bands(nb, cfg.interval_count)) {
                    std::size_t lo = 0, hi = 0;
                    for (std::size_t b : bands)
                        if (iv.contains(b)) {
                            if (lo == 0) lo = b;
                            hi = b;
                        }
                    if (lo != 0) groups.push_back({lo, hi});
                }
            }
            const Split split = split_dataset(
                rois, {cfg.split.train_per_class, scn_split_seed.value_or(derive_seed(cfg.seed, "split"))});
            ScanConfig sc = cfg.scan;
            sc.train.rng_seed = derive_seed(cfg.seed, "scan");
            ScanOutcome outcome{.training = train_scan_cnn(rois, band_set, split, sc)};
            outcome.profile = per_band_accuracy(outcome.training.model, rois, split.test_ids, bands_of(band_set),
                                                sc.threads);
            for (const auto& iv : groups)
                outcome.interval_stats.push_back({iv, profile_stats(restrict_profile(outcome.profile, iv),
                                                                    sc.threshold)});
            outcome.selected = select_dense_interval(outcome.interval_stats);
            json stats = json::array();
            for (const auto& st : outcome.interval_stats) {
                json e = to_json(st.stats);
                e["interval"] = st.interval.label();
                stats.push_back(e);
            }
            write_json({{"bands", scn_bands},
                        {"split", to_json(split)},
                        {"interval_stats", stats},
                        {"overall", to_json(profile_stats(outcome.profile, sc.threshold))},
                        {"selected_interval", outcome.selected.label()},
                        {"config", to_json(sc)}},
                       out_path(cfg, scn_stats, "scan.json"));
            write_profile_csv(outcome.profile, rois.front().stack.wavelengths(),
                              out_path(cfg, scn_profile, "scan_profile.csv"));
            if (!scn_model.empty()) nn::save_model(outcome.training.model, scn_model);
            std::cout << "selected interval " << outcome.selected.label() << '\n';
        } else if (*trn || *ver) {
            const bool verifying = ver->parsed();
            const auto rois = load_rois(verifying ? ver_rois : trn_rois);
            const auto band_set = parse_interval_list(verifying ? ver_bands : trn_bands);
            const auto split_seed = verifying ? ver_split_seed : trn_split_seed;
            const Split split = split_dataset(
                rois, {cfg.split.train_per_class,
                       split_seed.value_or(derive_seed(cfg.seed, verifying ? "verify.split" : "split"))});
            ScanConfig fc = cfg.final_stage;
            fc.train.rng_seed = derive_seed(cfg.seed, verifying ? "verify" : "final");
            const auto top_seed = derive_seed(cfg.seed, verifying ? "verify.top" : "top");
            const RetrainOutcome r = verifying ? verify_transfer(band_set, rois, split, fc, top_seed)
                                               : retrain(rois, band_set, split, fc, top_seed);
            json j = retrain_json(r);
            j["bands"] = verifying ? ver_bands : trn_bands;
            j["split"] = to_json(split);
            if (verifying && !ver_reference.empty()) {
                const auto ref = read_profile_accuracy(ver_reference, r.profile.bands);
                j["profile_correlation"] = pearson_corr(ref, r.profile.accuracy);
            }
            const std::string stem = verifying ? "verification" : "final";
            write_json(j, out_path(cfg, verifying ? ver_report : trn_report, stem + ".json"));
            write_profile_csv(r.profile, rois.front().stack.wavelengths(),
                              out_path(cfg, verifying ? ver_profile : trn_profile, stem + "_profile.csv"));
            if (!verifying && !trn_model.empty()) nn::save_model(r.training.model, trn_model);
            std::cout << "accuracy " << r.accuracy << "  top bands " << r.top_bands.size() << '\n';
        } else if (*run) {
            try {
                cfg.validate();
            } catch (const ConfigError& e) {
                std::cerr << "config error: " << e.what() << '\n';
                return kExitConfig;
            }
            const FinalReport rep = run_pipeline(cfg);
            std::cout << "removed";
            for (const auto& iv : rep.removed) std::cout << ' ' << iv.label();
            std::cout << "\nselected";
            for (const auto& iv : rep.selected) std::cout << ' ' << iv.label();
            if (rep.final_stage) std::cout << "\nfinal accuracy " << rep.final_stage->accuracy;
            std::cout << "\nreport " << (cfg.out_dir / "report.json").string() << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const StageError& e) {
        std::cerr << e.what() << '\n';
        return kExitStage;
    } catch (const std::exception& e) {
        std::cerr << "failed: " << e.what() << '\n';
        return kExitStage;
    }
    return kExitOk;
}
