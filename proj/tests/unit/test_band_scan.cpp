#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "hsi/band_scan.hpp"
#include "hsi/error.hpp"
#include "hsi/synth.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace hsi;

namespace {

SynthDataset small_set(std::uint64_t seed) {
    SynthSpec spec;
    spec.seeds_per_class = 5;
    spec.band_count = 10;
    spec.image_size = 16;
    spec.rng_seed = seed;
    return generate_synthetic_dataset(spec);
}

ScanConfig small_scan() {
    ScanConfig cfg;
    cfg.shape.conv1_kernel = 3;
    cfg.shape.conv1_channels = 2;
    cfg.shape.conv2_kernel = 3;
    cfg.shape.conv2_channels = 3;
    cfg.shape.fc1 = 8;
    cfg.shape.fc2 = 4;
    cfg.train.iterations = 20;
    cfg.train.batch_size = 8;
    cfg.train.loss_record_stride = 5;
    return cfg;
}

}  // namespace

TEST_CASE("profile statistics") {
    const std::vector<double> acc{0.9, 0.9, 0.8, 1.0};
    const ProfileStats s = profile_stats(acc, 0.9);
    CHECK(s.mean == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(s.max == 1.0);
    CHECK(s.std == doctest::Approx(0.081649658).epsilon(1e-8));
    CHECK(s.count_ge_threshold == 3);
    CHECK(profile_stats(std::vector<double>{0.7}, 0.9).std == 0.0);
    CHECK_THROWS_AS(profile_stats(std::vector<double>{}, 0.9), ShapeError);
}

TEST_CASE("pearson correlation") {
    CHECK(pearson_corr(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 4}) ==
          doctest::Approx(0.981980506).epsilon(1e-9));
    CHECK_THROWS_AS(pearson_corr(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), ShapeError);
    CHECK_THROWS_AS(pearson_corr(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), ShapeError);

    std::mt19937_64 gen(3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        std::vector<double> a(3 + i), b(3 + i);
        for (std::size_t j = 0; j < a.size(); ++j) {
            a[j] = n(gen);
            b[j] = 0.3 * a[j] + n(gen);
        }
        const double r = pearson_corr(a, b);
        CHECK(std::abs(r - oracle::pearson(a, b)) < 1e-10);
        CHECK(r <= 1.0);
        CHECK(r >= -1.0);
        std::vector<double> b2(b);
        for (double& x : b2) x = 5.0 * x - 2.0;
        CHECK(pearson_corr(a, b2) == doctest::Approx(r).epsilon(1e-12));
    }
}

TEST_CASE("dense interval selection") {
    SUBCASE("published table rows") {
        const std::vector<IntervalStats> rows{
            {{51, 100}, {0.814, 0.90, 0.0419, 2, 0.9}},
            {{101, 150}, {0.787, 0.86, 0.0409, 0, 0.9}},
            {{151, 200}, {0.872, 0.95, 0.0514, 18, 0.9}},
        };
        CHECK(select_dense_interval(rows) == BandInterval{151, 200});
        std::vector<IntervalStats> reversed(rows.rbegin(), rows.rend());
        CHECK(select_dense_interval(reversed) == BandInterval{151, 200});
    }
    SUBCASE("ties fall back to mean, then max, then the lowest interval") {
        CHECK(select_dense_interval({{{1, 5}, {0.6, 0.9, 0, 1, 0.9}}, {{6, 10}, {0.7, 0.9, 0, 1, 0.9}}}) ==
              BandInterval{6, 10});
        CHECK(select_dense_interval({{{1, 5}, {0.7, 0.9, 0, 1, 0.9}}, {{6, 10}, {0.7, 0.95, 0, 1, 0.9}}}) ==
              BandInterval{6, 10});
        CHECK(select_dense_interval({{{6, 10}, {0.7, 0.9, 0, 1, 0.9}}, {{1, 5}, {0.7, 0.9, 0, 1, 0.9}}}) ==
              BandInterval{1, 5});
    }
    CHECK_THROWS_AS(select_dense_interval({}), ShapeError);
}

TEST_CASE("top bands") {
    BandAccuracyProfile p{{164, 165, 166}, {0.89, 0.91, 0.95}, "164-166"};
    CHECK(select_top_bands(p, 0.9) == std::vector<std::size_t>{165, 166});
    CHECK(select_top_bands(p, 0.99).empty());
    const auto r = restrict_profile(p, {165, 200});
    CHECK(r.bands == std::vector<std::size_t>{165, 166});
    CHECK(r.accuracy == std::vector<double>{0.91, 0.95});
}

TEST_CASE("split") {
    const auto data = small_set(1);
    const Split s = split_dataset(data.rois, {3, 7});
    CHECK(s.train_ids.size() == 6);
    CHECK(s.test_ids.size() == 4);
    CHECK(std::is_sorted(s.train_ids.begin(), s.train_ids.end()));
    std::vector<int> all = s.train_ids;
    all.insert(all.end(), s.test_ids.begin(), s.test_ids.end());
    std::sort(all.begin(), all.end());
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
    CHECK(all.size() == data.rois.size());
    CHECK(split_dataset(data.rois, {3, 7}) == s);
    CHECK(split_dataset(data.rois, {4, 1}).test_ids.size() == 2);
    CHECK_THROWS_AS(split_dataset(data.rois, {5, 1}), ConfigError);
    CHECK_THROWS_AS(split_dataset(data.rois, {0, 1}), ConfigError);
}

TEST_CASE("per-band accuracy matches the per-sample oracle") {
    const auto data = small_set(2);
    const Split split = split_dataset(data.rois, {3, 1});
    const ScanConfig cfg = small_scan();
    const ScanTraining t = train_scan_cnn(data.rois, {{1, 10}}, split, cfg);
    std::vector<std::size_t> bands(10);
    for (std::size_t b = 0; b < 10; ++b) bands[b] = b + 1;
    const auto profile = per_band_accuracy(t.model, data.rois, split.test_ids, bands);
    const auto want = oracle::band_accuracy(t.model, data.rois, split.test_ids, bands);
    CHECK(profile.bands == bands);
    for (std::size_t i = 0; i < bands.size(); ++i) CHECK(std::abs(profile.accuracy[i] - want[i]) < 1e-10);
    CHECK(per_band_accuracy(t.model, data.rois, split.test_ids, bands, 3).accuracy == profile.accuracy);

    double mean = 0.0;
    for (double a : want) mean += a;
    CHECK(pooled_accuracy(t.model, data.rois, split.test_ids, bands) == doctest::Approx(mean / 10.0).epsilon(1e-12));

    SUBCASE("training is repeatable") {
        const ScanTraining t2 = train_scan_cnn(data.rois, {{1, 10}}, split, cfg);
        CHECK(t2.curve == t.curve);
        CHECK(t2.model.params() == t.model.params());
    }
    SUBCASE("empty band set") { CHECK_THROWS_AS(train_scan_cnn(data.rois, {}, split, cfg), ConfigError); }
}

TEST_CASE("band dataset ordering") {
    const auto data = small_set(3);
    const std::vector<int> ids{4, 1};
    const std::vector<std::size_t> bands{2, 5};
    const nn::Dataset d = band_dataset(data.rois, ids, bands);
    REQUIRE(d.size() == 4);
    CHECK(d.samples[0] == data.rois[4].stack.band_image(1));
    CHECK(d.samples[1] == data.rois[4].stack.band_image(4));
    CHECK(d.samples[2] == data.rois[1].stack.band_image(1));
    CHECK(d.labels[0] == data.rois[4].class_index());
    CHECK(d.labels[2] == data.rois[1].class_index());
}

TEST_CASE("profile csv") {
    TempDir tmp;
    BandAccuracyProfile p{{1, 2}, {0.5, 1.0}, "1-2"};
    write_profile_csv(p, std::vector<double>{900.0, 950.5}, tmp.path / "p.csv");
    CHECK(read_file(tmp.path / "p.csv") == "band,wavelength_nm,accuracy\n1,900,0.5\n2,950.5,1\n");
}
