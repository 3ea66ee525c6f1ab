#include <doctest.h>

#include <algorithm>
#include <random>

#include "hsi/error.hpp"
#include "hsi/pipeline.hpp"
#include "hsi/segmentation.hpp"
#include "hsi/synth.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace hsi;

namespace {

Image ring_image(std::size_t n, std::size_t margin, double border, double interior) {
    Image img(n, n, interior);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
            if (r < margin || c < margin || r >= n - margin || c >= n - margin) img(r, c) = border;
    return img;
}

BinaryMask block_mask(std::size_t rows, std::size_t cols, std::initializer_list<BoundingBox> blocks) {
    BinaryMask m(rows, cols);
    for (const auto& b : blocks)
        for (std::size_t r = b.row_min; r <= b.row_max; ++r)
            for (std::size_t c = b.col_min; c <= b.col_max; ++c) m.set(r, c, true);
    return m;
}

}  // namespace

TEST_CASE("background threshold from the border ring") {
    CHECK(estimate_background_threshold(ring_image(20, 3, 0.2, 0.9), 3) == 0.2);

    SUBCASE("interior values never matter") {
        Image img = ring_image(16, 2, 0.1, 0.0);
        img(8, 8) = 100.0;
        img(1, 5) = 0.35;
        CHECK(estimate_background_threshold(img, 2) == 0.35);
    }
    SUBCASE("percentile below one is the sorted ring order statistic") {
        std::mt19937_64 gen(8);
        for (int i = 0; i < 25; ++i) {
            const Image img = oracle::random_image(gen, 12, 15, 0.0, 1.0);
            std::vector<double> ring;
            for (std::size_t r = 0; r < 12; ++r)
                for (std::size_t c = 0; c < 15; ++c)
                    if (r < 2 || c < 2 || r >= 10 || c >= 13) ring.push_back(img(r, c));
            std::sort(ring.begin(), ring.end());
            const double p = 0.5 + 0.02 * i;
            const auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(ring.size()))) - 1;
            CHECK(estimate_background_threshold(img, 2, p) == ring[idx]);
        }
    }
    SUBCASE("invalid arguments") {
        const Image img(10, 10, 0.0);
        CHECK_THROWS_AS(estimate_background_threshold(img, 0), std::invalid_argument);
        CHECK_THROWS_AS(estimate_background_threshold(img, 5), std::invalid_argument);
        CHECK_THROWS_AS(estimate_background_threshold(img, 2, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(estimate_background_threshold(img, 2, 1.5), std::invalid_argument);
    }
}

TEST_CASE("binarize is a strict comparison") {
    const BinaryMask m = binarize(Image(1, 3, std::vector<double>{0.1, 0.2, 0.3}), 0.2);
    CHECK(m.data == std::vector<std::uint8_t>{0, 0, 1});
}

TEST_CASE("bounding boxes") {
    SUBCASE("one 3x3 block") {
        const auto boxes = extract_bounding_boxes(block_mask(10, 10, {{2, 4, 5, 7}}), 1);
        CHECK(boxes == std::vector<BoundingBox>{{2, 4, 5, 7}});
    }
    SUBCASE("two blocks come back in scan order") {
        const auto boxes = extract_bounding_boxes(block_mask(12, 12, {{6, 8, 1, 3}, {1, 2, 7, 9}}), 1);
        CHECK(boxes == std::vector<BoundingBox>{{1, 2, 7, 9}, {6, 8, 1, 3}});
    }
    SUBCASE("empty mask") { CHECK(extract_bounding_boxes(BinaryMask(5, 5), 1).empty()); }
    SUBCASE("diagonal neighbours join one component") {
        BinaryMask m(4, 4);
        m.set(0, 0, true);
        m.set(1, 1, true);
        m.set(2, 2, true);
        CHECK(extract_bounding_boxes(m, 1) == std::vector<BoundingBox>{{0, 2, 0, 2}});
    }
    SUBCASE("components below min_area are dropped") {
        const auto mask = block_mask(10, 10, {{0, 0, 0, 0}, {4, 8, 4, 8}});
        CHECK(extract_bounding_boxes(mask, 2) == std::vector<BoundingBox>{{4, 8, 4, 8}});
        CHECK(extract_bounding_boxes(mask, 26).empty());
    }
}

TEST_CASE("resize") {
    SUBCASE("halving averages 2x2 blocks") {
        std::mt19937_64 gen(4);
        for (int i = 0; i < 20; ++i) {
            const Image src = oracle::random_image(gen, 4, 4);
            const Image out = resize_bilinear(src, 2, 2);
            for (std::size_t r = 0; r < 2; ++r)
                for (std::size_t c = 0; c < 2; ++c) {
                    const double mean = (src(2 * r, 2 * c) + src(2 * r, 2 * c + 1) + src(2 * r + 1, 2 * c) +
                                         src(2 * r + 1, 2 * c + 1)) / 4.0;
                    CHECK(out(r, c) == doctest::Approx(mean).epsilon(1e-12));
                }
        }
    }
    SUBCASE("same size is the identity") {
        std::mt19937_64 gen(5);
        const Image src = oracle::random_image(gen, 5, 7);
        CHECK(resize_bilinear(src, 5, 7) == src);
        BinaryMask m(3, 3);
        m.set(1, 2, true);
        CHECK(resize_nearest(m, 3, 3) == m);
    }
    SUBCASE("constant images stay constant") {
        const Image out = resize_bilinear(Image(3, 5, 0.25), 8, 6);
        for (double v : out.pixels) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
    }
}

TEST_CASE("extract_rois crops, masks and resizes every band") {
    std::mt19937_64 gen(6);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::vector<float> data(8 * 8 * 3);
    for (float& v : data) v = static_cast<float>(u(gen));
    const HyperCube cube(8, 8, 3, data, default_wavelength_table(3));
    const BinaryMask mask = block_mask(8, 8, {{2, 5, 2, 5}});
    const auto rois = extract_rois(cube, {{2, 5, 2, 5}}, mask, {SeedClass::diploid}, 2);
    REQUIRE(rois.size() == 1);
    const SeedROI& roi = rois[0];
    CHECK(roi.label == SeedClass::diploid);
    CHECK(roi.stack.rows() == 2);
    CHECK(roi.stack.bands() == 3);
    for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t c = 0; c < 2; ++c) {
                double mean = 0.0;
                for (std::size_t dr = 0; dr < 2; ++dr)
                    for (std::size_t dc = 0; dc < 2; ++dc) mean += cube.at(2 + 2 * r + dr, 2 + 2 * c + dc, b);
                CHECK(roi.stack.at(r, c, b) == doctest::Approx(mean / 4.0).epsilon(1e-6));
            }

    SUBCASE("pixels outside the seed mask are zero in every band") {
        BinaryMask partial = mask;
        partial.set(2, 2, false);
        partial.set(2, 3, false);
        const auto big = extract_rois(cube, {{2, 5, 2, 5}}, partial, {SeedClass::haploid}, 4);
        for (std::size_t b = 0; b < 3; ++b) {
            CHECK(big[0].stack.at(0, 0, b) == 0.0f);
            CHECK(big[0].stack.at(0, 1, b) == 0.0f);
            CHECK(big[0].stack.at(1, 1, b) == cube.at(3, 3, b));
        }
    }
    SUBCASE("argument checks") {
        CHECK_THROWS_AS(extract_rois(cube, {{2, 5, 2, 5}}, mask, {}, 2), ShapeError);
        CHECK_THROWS_AS(extract_rois(cube, {{2, 9, 2, 5}}, mask, {SeedClass::haploid}, 2), ShapeError);
        CHECK_THROWS_AS(extract_rois(cube, {{2, 5, 2, 5}}, BinaryMask(4, 4), {SeedClass::haploid}, 2), ShapeError);
    }
}

TEST_CASE("ROI files round trip") {
    TempDir tmp;
    SynthSpec spec;
    spec.seeds_per_class = 2;
    spec.band_count = 10;
    spec.image_size = 12;
    spec.rng_seed = 3;
    const auto data = generate_synthetic_dataset(spec);
    save_roi_dir(data.rois, tmp.path / "rois");
    const auto back = load_roi_dir(tmp.path / "rois");
    REQUIRE(back.size() == data.rois.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].seed_id == data.rois[i].seed_id);
        CHECK(back[i].label == data.rois[i].label);
        CHECK(back[i].source_box == data.rois[i].source_box);
        CHECK(back[i].stack.data().size() == data.rois[i].stack.data().size());
        CHECK(std::equal(back[i].stack.data().begin(), back[i].stack.data().end(),
                         data.rois[i].stack.data().begin()));
    }
}

TEST_CASE("labels file") {
    TempDir tmp;
    std::ofstream(tmp.path / "l.csv") << "# index,label\n1,diploid\n0,haploid\n";
    CHECK(load_labels(tmp.path / "l.csv", 2) == std::vector<SeedClass>{SeedClass::haploid, SeedClass::diploid});
    CHECK_THROWS_AS(load_labels(tmp.path / "l.csv", 3), FormatError);
    std::ofstream(tmp.path / "bad.csv") << "0,triploid\n";
    CHECK_THROWS_AS(load_labels(tmp.path / "bad.csv", 1), FormatError);
}

TEST_CASE("segmenting generated scenes recovers the planted boxes") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        SynthSpec spec;
        spec.seeds_per_class = 3;
        spec.rng_seed = seed;
        spec.blob.axis_jitter = 0.04;
        spec.blob.angle_jitter = 0.25;
        spec.blob.center_jitter = 0.04;
        spec.validate();
        const RawScene scene = generate_raw_cube(spec);
        const HyperCube reflect = calibrate(scene.raw, scene.frames);
        SegmentOptions opt;
        opt.band = scene.reference_band;
        opt.target = spec.image_size;
        const Segmentation seg = segment_seeds(reflect, scene.labels, opt);
        CHECK(seg.boxes == scene.boxes);
        CHECK(seg.mask == scene.mask);
        REQUIRE(seg.rois.size() == scene.boxes.size());
        for (const auto& roi : seg.rois) {
            const BinaryMask support = roi_support(roi);
            const BinaryMask expected = resize_nearest(
                [&] {
                    BinaryMask crop(roi.source_box.height(), roi.source_box.width());
                    for (std::size_t r = 0; r < crop.rows; ++r)
                        for (std::size_t c = 0; c < crop.cols; ++c)
                            crop.set(r, c, scene.mask(roi.source_box.row_min + r, roi.source_box.col_min + c));
                    return crop;
                }(),
                spec.image_size, spec.image_size);
            for (std::size_t i = 0; i < support.data.size(); ++i)
                if (!expected.data[i]) CHECK(support.data[i] == 0);
        }
    }
}
