#include "hsi/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "hsi/error.hpp"
#include "hsi/rng.hpp"

namespace hsi {

void SynthSpec::validate() {
    if (band_count == 0) throw ConfigError("synth: band_count must be positive");
    if (seeds_per_class == 0) throw ConfigError("synth: seeds_per_class must be positive");
    if (image_size < 8) throw ConfigError("synth: image_size must be at least 8");
    if (noise_std.empty()) throw ConfigError("synth: noise_std is empty");
    if (intervals.empty()) intervals = partition_bands(band_count, noise_std.size());
    if (intervals.size() != noise_std.size()) {
        throw ConfigError("synth: " + std::to_string(intervals.size()) + " intervals but " +
                          std::to_string(noise_std.size()) + " noise levels");
    }
    std::size_t next = 1;
    for (const auto& iv : intervals) {
        check_interval(iv, band_count);
        if (iv.start != next) throw ConfigError("synth: intervals must tile 1-" + std::to_string(band_count));
        next = iv.end + 1;
    }
    if (next != band_count + 1) throw ConfigError("synth: intervals must tile 1-" + std::to_string(band_count));
    for (double s : noise_std) {
        if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("synth: noise_std entries must be >= 0");
    }
    if (signal_interval < 1 || signal_interval > intervals.size()) {
        throw ConfigError("synth: signal_interval out of range");
    }
    if (!(signal_strength > 0.0)) throw ConfigError("synth: signal_strength must be > 0");
    if (!(brightness_jitter >= 0.0) || brightness_jitter > 0.5) {
        throw ConfigError("synth: brightness_jitter must lie in [0, 0.5]");
    }
    if (!(gain_jitter >= 0.0) || gain_jitter > 0.5) throw ConfigError("synth: gain_jitter must lie in [0, 0.5]");
    if (!(noisy_factor >= 1.0)) throw ConfigError("synth: noisy_factor must be >= 1");
    if (!(blob.semi_minor > 0.0) || blob.semi_major < blob.semi_minor || blob.semi_major + blob.axis_jitter +
            blob.center_jitter > 0.5) {
        throw ConfigError("synth: blob geometry does not fit the image");
    }
}

std::vector<BandInterval> SynthSpec::effective_intervals() const {
    return intervals.empty() ? partition_bands(band_count, noise_std.size()) : intervals;
}

namespace {

struct Ellipse {
    double cy, cx, a, b, angle;
};

Ellipse seed_ellipse(const SynthSpec& spec, int seed_id) {
    std::mt19937_64 gen(derive_seed(spec.rng_seed, "synth.blob", {static_cast<std::uint64_t>(seed_id)}));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double n = static_cast<double>(spec.image_size);
    const auto& g = spec.blob;
    Ellipse e{};
    e.a = (g.semi_major + g.axis_jitter * unit(gen)) * n;
    e.b = (g.semi_minor + g.axis_jitter * unit(gen)) * n;
    e.angle = g.angle + g.angle_jitter * unit(gen);
    e.cy = n / 2.0 + g.center_jitter * n * unit(gen);
    e.cx = n / 2.0 + g.center_jitter * n * unit(gen);
    return e;
}

// Squared normalized radius of the pixel centre; <= 1 inside the blob.
double ellipse_r2(const Ellipse& e, std::size_t r, std::size_t c) {
    const double y = static_cast<double>(r) + 0.5 - e.cy;
    const double x = static_cast<double>(c) + 0.5 - e.cx;
    const double u = (x * std::cos(e.angle) + y * std::sin(e.angle)) / e.a;
    const double v = (-x * std::sin(e.angle) + y * std::cos(e.angle)) / e.b;
    return u * u + v * v;
}

SeedClass seed_label(int seed_id) { return seed_id % 2 == 0 ? SeedClass::haploid : SeedClass::diploid; }

std::vector<std::size_t> noisy_intervals(const SynthSpec& spec) {
    const double lo = *std::min_element(spec.noise_std.begin(), spec.noise_std.end());
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < spec.noise_std.size(); ++k) {
        const double s = spec.noise_std[k];
        if (lo == 0.0 ? s > 0.0 : s > spec.noisy_factor * lo) out.push_back(k + 1);
    }
    return out;
}

SynthDataset generate(SynthSpec spec, bool with_noise) {
    spec.validate();
    const std::size_t n = spec.image_size;
    const std::size_t bands = spec.band_count;
    const auto wavelengths = default_wavelength_table(bands);
    const auto& signal = spec.intervals[spec.signal_interval - 1];

    std::vector<std::size_t> interval_of(bands + 1);
    for (std::size_t k = 0; k < spec.intervals.size(); ++k)
        for (std::size_t b = spec.intervals[k].start; b <= spec.intervals[k].end; ++b) interval_of[b] = k;

    SynthDataset out;
    out.truth.noisy_intervals = noisy_intervals(spec);
    out.truth.discriminative_interval = spec.signal_interval;

    const int total = static_cast<int>(2 * spec.seeds_per_class);
    for (int id = 0; id < total; ++id) {
        const SeedClass label = seed_label(id);
        const Ellipse e = seed_ellipse(spec, id);
        CubeMeta meta;
        meta.cultivar = spec.cultivar;
        meta.calibrated = true;
        HyperCube stack(n, n, bands, wavelengths, meta);

        double albedo = 1.0;
        if (spec.brightness_jitter > 0.0) {
            std::mt19937_64 gen(derive_seed(spec.rng_seed, "synth.albedo", {static_cast<std::uint64_t>(id)}));
            std::normal_distribution<double> jitter(1.0, spec.brightness_jitter);
            albedo = std::clamp(jitter(gen), 0.25, 1.75);
        }

        std::vector<double> shade(n * n, 0.0);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c) {
                const double r2 = ellipse_r2(e, r, c);
                if (r2 <= 1.0) shade[r * n + c] = 1.0 - spec.blob.shading * r2;
            }

        for (std::size_t b = 1; b <= bands; ++b) {
            const double phase = std::numbers::pi * static_cast<double>(b - 1) / static_cast<double>(bands);
            double gain = 1.0;
            if (spec.gain_jitter > 0.0) {
                std::mt19937_64 g(derive_seed(spec.rng_seed, "synth.gain",
                                              {static_cast<std::uint64_t>(id), static_cast<std::uint64_t>(b)}));
                std::normal_distribution<double> jitter(1.0, spec.gain_jitter);
                gain = std::clamp(jitter(g), 0.25, 1.75);
            }
            const double level = albedo * gain * (spec.base_level + spec.base_swing * std::sin(phase));
            const double offset = label == SeedClass::diploid && signal.contains(b) ? spec.signal_strength : 0.0;
            const double sd = spec.noise_std[interval_of[b]];
            std::mt19937_64 gen(derive_seed(spec.rng_seed, "synth.noise",
                                            {static_cast<std::uint64_t>(id), static_cast<std::uint64_t>(b)}));
            std::normal_distribution<double> noise(0.0, 1.0);
            auto plane = stack.band_plane(b - 1);
            for (std::size_t p = 0; p < n * n; ++p) {
                if (shade[p] == 0.0) continue;
                double v = level * shade[p] + offset;
                if (with_noise) v += sd * noise(gen);
                plane[p] = static_cast<float>(v);
            }
        }

        SeedROI roi;
        roi.stack = std::move(stack);
        roi.label = label;
        roi.seed_id = id;
        roi.source_box = {0, n - 1, 0, n - 1};
        roi.cultivar = spec.cultivar;
        out.rois.push_back(std::move(roi));
        out.truth.labels.push_back(label);
    }
    return out;
}

}  // namespace

SynthDataset generate_synthetic_dataset(const SynthSpec& spec) { return generate(spec, true); }

SynthDataset generate_noiseless_dataset(const SynthSpec& spec) { return generate(spec, false); }

BinaryMask synthetic_blob_mask(const SynthSpec& spec, int seed_id) {
    const Ellipse e = seed_ellipse(spec, seed_id);
    BinaryMask mask(spec.image_size, spec.image_size);
    for (std::size_t r = 0; r < spec.image_size; ++r)
        for (std::size_t c = 0; c < spec.image_size; ++c) mask.set(r, c, ellipse_r2(e, r, c) <= 1.0);
    return mask;
}

RawScene generate_raw_cube(const SynthSpec& spec_in) {
    SynthSpec spec = spec_in;
    spec.validate();
    const SynthDataset data = generate_synthetic_dataset(spec);
    const std::size_t n = spec.image_size;
    const std::size_t bands = spec.band_count;
    const std::size_t count = data.rois.size();
    const std::size_t grid_cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
    const std::size_t grid_rows = (count + grid_cols - 1) / grid_cols;
    const std::size_t border = 12;
    const std::size_t gap = 6;
    const std::size_t rows = 2 * border + grid_rows * n + (grid_rows - 1) * gap;
    const std::size_t cols = 2 * border + grid_cols * n + (grid_cols - 1) * gap;
    const auto wavelengths = default_wavelength_table(bands);
    constexpr double kSeedFloor = 0.08;
    constexpr double kBackgroundJitter = 0.004;

    RawScene scene;
    std::size_t ref = 0;
    for (std::size_t k = 0; k < spec.noise_std.size(); ++k)
        if (spec.noise_std[k] < spec.noise_std[ref]) ref = k;
    scene.reference_band = spec.intervals[ref].start;

    CubeMeta meta;
    meta.cultivar = spec.cultivar;
    meta.acquisition_id = "synthetic-" + std::to_string(spec.rng_seed);
    meta.calibrated = true;
    scene.reflectance = HyperCube(rows, cols, bands, wavelengths, meta);
    scene.mask = BinaryMask(rows, cols);

    std::mt19937_64 bg(derive_seed(spec.rng_seed, "synth.background"));
    // Background sits at or below the dark level: about half the pixels read
    // exactly dark, the rest dip slightly under it.
    std::normal_distribution<double> bg_value(0.0, kBackgroundJitter);
    for (std::size_t b = 0; b < bands; ++b)
        for (auto& v : scene.reflectance.band_plane(b)) v = static_cast<float>(std::min(0.0, bg_value(bg)));

    // Boxes are reported in raster order of each blob's first pixel, which is
    // the order a scan-line component search finds them.
    struct Placed {
        std::size_t first;
        BoundingBox box;
        SeedClass label;
    };
    std::vector<Placed> placed;
    for (std::size_t k = 0; k < count; ++k) {
        const auto& roi = data.rois[k];
        const std::size_t r0 = border + (k / grid_cols) * (n + gap);
        const std::size_t c0 = border + (k % grid_cols) * (n + gap);
        const BinaryMask blob = synthetic_blob_mask(spec, roi.seed_id);
        BoundingBox box{rows, 0, cols, 0};
        std::size_t first = rows * cols;
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c) {
                if (!blob(r, c)) continue;
                const std::size_t R = r0 + r, C = c0 + c;
                scene.mask.set(R, C, true);
                first = std::min(first, R * cols + C);
                box.row_min = std::min(box.row_min, R);
                box.row_max = std::max(box.row_max, R);
                box.col_min = std::min(box.col_min, C);
                box.col_max = std::max(box.col_max, C);
                for (std::size_t b = 0; b < bands; ++b) {
                    scene.reflectance.set(R, C, b, std::max(roi.stack.at(r, c, b), static_cast<float>(kSeedFloor)));
                }
            }
        placed.push_back({first, box, roi.label});
    }
    std::sort(placed.begin(), placed.end(), [](const Placed& x, const Placed& y) { return x.first < y.first; });
    for (const auto& p : placed) {
        scene.boxes.push_back(p.box);
        scene.labels.push_back(p.label);
    }

    CubeMeta frame_meta;
    frame_meta.acquisition_id = meta.acquisition_id;
    scene.frames.dark = HyperCube(1, cols, bands, wavelengths, frame_meta);
    scene.frames.white = HyperCube(1, cols, bands, wavelengths, frame_meta);
    for (std::size_t b = 0; b < bands; ++b)
        for (std::size_t c = 0; c < cols; ++c) {
            const double x = static_cast<double>(c) / static_cast<double>(cols);
            const double t = static_cast<double>(b) / static_cast<double>(bands);
            const double dark = 96.0 + 16.0 * std::sin(7.0 * x + 3.0 * t);
            const double white = dark + 3000.0 + 600.0 * std::cos(std::numbers::pi * t) - 200.0 * x;
            scene.frames.dark.set(0, c, b, static_cast<float>(dark));
            scene.frames.white.set(0, c, b, static_cast<float>(white));
        }

    meta.calibrated = false;
    scene.raw = HyperCube(rows, cols, bands, wavelengths, meta);
    for (std::size_t b = 0; b < bands; ++b)
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                const double d = scene.frames.dark.at(0, c, b);
                const double w = scene.frames.white.at(0, c, b);
                scene.raw.set(r, c, b, static_cast<float>(d + scene.reflectance.at(r, c, b) * (w - d)));
            }
    return scene;
}

nlohmann::json to_json(const SynthSpec& spec) {
    nlohmann::json iv = nlohmann::json::array();
    for (const auto& i : spec.effective_intervals()) iv.push_back(i.label());
    return {
        {"band_count", spec.band_count},
        {"seeds_per_class", spec.seeds_per_class},
        {"image_size", spec.image_size},
        {"intervals", iv},
        {"noise_std", spec.noise_std},
        {"signal_interval", spec.signal_interval},
        {"signal_strength", spec.signal_strength},
        {"blob_geometry",
         {{"semi_major", spec.blob.semi_major},
          {"semi_minor", spec.blob.semi_minor},
          {"axis_jitter", spec.blob.axis_jitter},
          {"angle", spec.blob.angle},
          {"angle_jitter", spec.blob.angle_jitter},
          {"center_jitter", spec.blob.center_jitter},
          {"shading", spec.blob.shading}}},
        {"base_level", spec.base_level},
        {"base_swing", spec.base_swing},
        {"brightness_jitter", spec.brightness_jitter},
        {"gain_jitter", spec.gain_jitter},
        {"noisy_factor", spec.noisy_factor},
        {"cultivar", spec.cultivar},
        {"rng_seed", spec.rng_seed},
    };
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
    SynthSpec s;
    try {
        if (!j.is_object()) throw ConfigError("synth spec must be a JSON object");
        for (const auto& [key, _] : j.items()) {
            static const char* known[] = {"band_count",   "seeds_per_class", "image_size",   "intervals",
                                          "noise_std",    "signal_interval", "signal_strength",
                                          "blob_geometry", "base_level",     "base_swing",   "brightness_jitter", "gain_jitter", "noisy_factor",
                                          "cultivar",     "rng_seed"};
            if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
                std::end(known)) {
                throw ConfigError("synth spec: unknown key '" + key + "'");
            }
        }
        s.band_count = j.value("band_count", s.band_count);
        s.seeds_per_class = j.value("seeds_per_class", s.seeds_per_class);
        s.image_size = j.value("image_size", s.image_size);
        if (j.contains("intervals")) {
            for (const auto& v : j.at("intervals")) s.intervals.push_back(parse_interval(v.get<std::string>()));
        }
        s.noise_std = j.value("noise_std", s.noise_std);
        s.signal_interval = j.value("signal_interval", s.signal_interval);
        s.signal_strength = j.value("signal_strength", s.signal_strength);
        if (j.contains("blob_geometry")) {
            const auto& g = j.at("blob_geometry");
            s.blob.semi_major = g.value("semi_major", s.blob.semi_major);
            s.blob.semi_minor = g.value("semi_minor", s.blob.semi_minor);
            s.blob.axis_jitter = g.value("axis_jitter", s.blob.axis_jitter);
            s.blob.angle = g.value("angle", s.blob.angle);
            s.blob.angle_jitter = g.value("angle_jitter", s.blob.angle_jitter);
            s.blob.center_jitter = g.value("center_jitter", s.blob.center_jitter);
            s.blob.shading = g.value("shading", s.blob.shading);
        }
        s.base_level = j.value("base_level", s.base_level);
        s.base_swing = j.value("base_swing", s.base_swing);
        s.brightness_jitter = j.value("brightness_jitter", s.brightness_jitter);
        s.gain_jitter = j.value("gain_jitter", s.gain_jitter);
        s.noisy_factor = j.value("noisy_factor", s.noisy_factor);
        s.cultivar = j.value("cultivar", s.cultivar);
        s.rng_seed = j.value("rng_seed", s.rng_seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("synth spec: ") + e.what());
    }
    s.validate();
    return s;
}

nlohmann::json to_json(const GroundTruth& truth) {
    nlohmann::json labels = nlohmann::json::array();
    for (auto l : truth.labels) labels.push_back(to_string(l));
    return {{"noisy_intervals", truth.noisy_intervals},
            {"discriminative_interval", truth.discriminative_interval},
            {"labels", labels}};
}

}  // namespace hsi
