#include <doctest.h>

#include <cmath>

#include "hsi/error.hpp"
#include "hsi/synth.hpp"
#include "test_util.hpp"

using namespace hsi;

namespace {

SynthSpec rigid_spec() {
    SynthSpec spec;
    spec.seeds_per_class = 4;
    spec.blob.axis_jitter = 0.0;
    spec.blob.angle_jitter = 0.0;
    spec.blob.center_jitter = 0.0;
    spec.brightness_jitter = 0.0;
    spec.gain_jitter = 0.0;
    spec.noise_std.assign(5, 0.0);
    spec.validate();
    return spec;
}

/// Mean over blob pixels of one seed's band image.
double blob_mean(const SeedROI& roi, const BinaryMask& mask, std::size_t band) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < mask.rows; ++r)
        for (std::size_t c = 0; c < mask.cols; ++c)
            if (mask(r, c)) {
                s += roi.stack.at(r, c, band);
                ++n;
            }
    return s / static_cast<double>(n);
}

}  // namespace

TEST_CASE("spec validation and defaults") {
    SynthSpec spec;
    spec.validate();
    CHECK(spec.band_count == 50);
    CHECK(spec.seeds_per_class == 20);
    CHECK(spec.image_size == 32);
    CHECK(spec.intervals == partition_bands(50, 5));
    CHECK(spec.signal_interval == 4);
    CHECK(spec.signal_strength == 0.3);

    SynthSpec bad;
    bad.signal_interval = 6;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = {};
    bad.noise_std = {0.1, -0.1, 0.1, 0.1, 0.1};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = {};
    bad.signal_strength = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = {};
    bad.intervals = {{1, 10}, {12, 50}};
    bad.noise_std = {0.1, 0.1};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(synth_spec_from_json({{"noise", 1}}), ConfigError);
}

TEST_CASE("spec json round trip") {
    SynthSpec spec;
    spec.rng_seed = 77;
    spec.noise_std = {0.2, 0.1, 0.3};
    spec.signal_interval = 2;
    spec.blob.shading = 0.1;
    spec.validate();
    const SynthSpec back = synth_spec_from_json(to_json(spec));
    CHECK(to_json(back) == to_json(spec));
}

TEST_CASE("no noise and identical seeds: classes differ only by the planted offset") {
    SynthSpec spec = rigid_spec();
    const auto data = generate_synthetic_dataset(spec);
    const auto& signal = spec.intervals[spec.signal_interval - 1];
    const BinaryMask mask = synthetic_blob_mask(spec, 0);
    const SeedROI& h = data.rois[0];
    const SeedROI& d = data.rois[1];
    REQUIRE(h.label == SeedClass::haploid);
    REQUIRE(d.label == SeedClass::diploid);
    for (std::size_t b = 1; b <= spec.band_count; ++b) {
        const double gap = signal.contains(b) ? 0.3 : 0.0;
        for (std::size_t r = 0; r < spec.image_size; ++r)
            for (std::size_t c = 0; c < spec.image_size; ++c) {
                const double diff = d.stack.at(r, c, b - 1) - h.stack.at(r, c, b - 1);
                CHECK(std::abs(diff - (mask(r, c) ? gap : 0.0)) < 1e-6);
            }
    }
    for (std::size_t k = 2; k < data.rois.size(); ++k) {
        const SeedROI& same = data.rois[k % 2];
        CHECK(std::equal(data.rois[k].stack.data().begin(), data.rois[k].stack.data().end(),
                         same.stack.data().begin()));
    }
}

TEST_CASE("planted gap with jittered seeds") {
    SynthSpec spec;
    spec.rng_seed = 4;
    spec.blob.axis_jitter = 0.04;
    spec.blob.angle_jitter = 0.25;
    spec.blob.center_jitter = 0.04;
    spec.validate();
    SynthSpec stronger = spec;
    stronger.signal_strength = 0.5;
    const auto a = generate_noiseless_dataset(spec);
    const auto b = generate_noiseless_dataset(stronger);
    const auto& signal = spec.intervals[spec.signal_interval - 1];
    for (std::size_t k = 0; k < a.rois.size(); ++k) {
        const BinaryMask mask = synthetic_blob_mask(spec, static_cast<int>(k));
        const bool diploid = a.rois[k].label == SeedClass::diploid;
        for (std::size_t band = 1; band <= spec.band_count; ++band) {
            const double want = diploid && signal.contains(band) ? 0.2 : 0.0;
            CHECK(std::abs(blob_mean(b.rois[k], mask, band - 1) - blob_mean(a.rois[k], mask, band - 1) - want) <
                  1e-6);
        }
    }
}

TEST_CASE("noise level per interval") {
    SynthSpec spec;
    spec.rng_seed = 9;
    spec.seeds_per_class = 6;
    spec.noise_std = {0.5, 0.05, 0.2, 0.05, 0.5};
    spec.validate();
    const auto noisy = generate_synthetic_dataset(spec);
    const auto clean = generate_noiseless_dataset(spec);
    for (std::size_t k = 0; k < spec.intervals.size(); ++k) {
        double ss = 0.0;
        std::size_t n = 0;
        for (std::size_t s = 0; s < noisy.rois.size(); ++s) {
            const BinaryMask mask = synthetic_blob_mask(spec, static_cast<int>(s));
            for (std::size_t b = spec.intervals[k].start; b <= spec.intervals[k].end; ++b)
                for (std::size_t r = 0; r < mask.rows; ++r)
                    for (std::size_t c = 0; c < mask.cols; ++c) {
                        if (!mask(r, c)) {
                            CHECK(noisy.rois[s].stack.at(r, c, b - 1) == 0.0f);
                            continue;
                        }
                        const double e = noisy.rois[s].stack.at(r, c, b - 1) - clean.rois[s].stack.at(r, c, b - 1);
                        ss += e * e;
                        ++n;
                    }
        }
        const double sd = std::sqrt(ss / static_cast<double>(n));
        CHECK(std::abs(sd - spec.noise_std[k]) < 0.1 * spec.noise_std[k]);
    }
    CHECK(noisy.truth.noisy_intervals == std::vector<std::size_t>{1, 3, 5});
    CHECK(noisy.truth.discriminative_interval == 4);
}

TEST_CASE("class difference is confined to the signal interval") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        SynthSpec spec;
        spec.rng_seed = seed;
        spec.validate();
        const auto data = generate_synthetic_dataset(spec);
        const auto& signal = spec.intervals[spec.signal_interval - 1];
        for (std::size_t band = 1; band <= spec.band_count; ++band) {
            std::vector<double> h, d;
            for (const auto& roi : data.rois) {
                const double m = blob_mean(roi, synthetic_blob_mask(spec, roi.seed_id), band - 1);
                (roi.label == SeedClass::haploid ? h : d).push_back(m);
            }
            auto mean_var = [](const std::vector<double>& v) {
                double m = 0.0, s = 0.0;
                for (double x : v) m += x;
                m /= static_cast<double>(v.size());
                for (double x : v) s += (x - m) * (x - m);
                return std::pair{m, s / static_cast<double>(v.size() - 1)};
            };
            const auto [mh, vh] = mean_var(h);
            const auto [md, vd] = mean_var(d);
            const double t = (md - mh) / std::sqrt(vh / h.size() + vd / d.size());
            if (signal.contains(band))
                CHECK(t > 5.0);
            else
                CHECK(std::abs(t) < 3.0);
        }
    }
}

TEST_CASE("generation is deterministic") {
    SynthSpec spec;
    spec.seeds_per_class = 2;
    spec.rng_seed = 12;
    const auto a = generate_synthetic_dataset(spec);
    const auto b = generate_synthetic_dataset(spec);
    for (std::size_t k = 0; k < a.rois.size(); ++k) CHECK(a.rois[k].stack == b.rois[k].stack);
    spec.rng_seed = 13;
    const auto c = generate_synthetic_dataset(spec);
    CHECK_FALSE(c.rois[0].stack == a.rois[0].stack);
}

TEST_CASE("raw scenes calibrate back to the reflectance") {
    SynthSpec spec;
    spec.seeds_per_class = 3;
    spec.rng_seed = 21;
    const RawScene scene = generate_raw_cube(spec);
    const HyperCube reflect = calibrate(scene.raw, scene.frames);
    REQUIRE(reflect.data().size() == scene.reflectance.data().size());
    double worst = 0.0;
    for (std::size_t i = 0; i < reflect.data().size(); ++i)
        worst = std::max(worst, std::abs(static_cast<double>(reflect.data()[i]) - scene.reflectance.data()[i]));
    CHECK(worst < 1e-6);
    CHECK(scene.boxes.size() == 6);
    CHECK(scene.labels.size() == 6);
    CHECK(scene.frames.dark.rows() == 1);
    CHECK(scene.reference_band >= 1);
    CHECK(scene.reference_band <= spec.band_count);
}
