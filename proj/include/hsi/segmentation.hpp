#pragma once

// Seed/background separation on one reference band, connected-component
// bounding boxes, and masked, size-normalized per-seed ROI stacks.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hsi/hypercube.hpp"
#include "hsi/image.hpp"

namespace hsi {

struct BinaryMask {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> data;  // 0 or 1, row-major

    BinaryMask() = default;
    BinaryMask(std::size_t r, std::size_t c, bool fill = false) : rows(r), cols(c), data(r * c, fill ? 1 : 0) {}

    bool operator()(std::size_t r, std::size_t c) const { return data[r * cols + c] != 0; }
    void set(std::size_t r, std::size_t c, bool v) { data[r * cols + c] = v ? 1 : 0; }
    std::size_t count() const;

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

/// Inclusive pixel bounds.
struct BoundingBox {
    std::size_t row_min = 0;
    std::size_t row_max = 0;
    std::size_t col_min = 0;
    std::size_t col_max = 0;

    std::size_t height() const noexcept { return row_max - row_min + 1; }
    std::size_t width() const noexcept { return col_max - col_min + 1; }

    friend auto operator<=>(const BoundingBox&, const BoundingBox&) = default;
};

enum class SeedClass : int { haploid = 0, diploid = 1 };

std::string to_string(SeedClass label);
SeedClass seed_class_from_string(const std::string& text);

/// One seed's masked stack. `stack` is target x target x bands; pixels
/// outside the seed mask are exactly zero in every band.
struct SeedROI {
    HyperCube stack;
    SeedClass label = SeedClass::haploid;
    int seed_id = 0;
    BoundingBox source_box;
    std::string cultivar;

    int class_index() const noexcept { return static_cast<int>(label); }
};

/// `percentile` of the border ring of width `margin` (1.0 = maximum).
/// Order statistic: sorted ring values indexed at ceil(percentile * n) - 1.
double estimate_background_threshold(const Image& band_image, std::size_t margin, double percentile = 1.0);

/// true iff pixel > threshold.
BinaryMask binarize(const Image& band_image, double threshold);

/// One box per 8-connected component with area >= min_area, sorted by
/// (row_min, col_min).
std::vector<BoundingBox> extract_bounding_boxes(const BinaryMask& mask, std::size_t min_area = 25);

/// Crop every band to the box, zero pixels outside `mask`, resize to
/// target x target (bilinear for data, nearest for the mask), re-apply the
/// resized mask.
std::vector<SeedROI> extract_rois(const HyperCube& cube, const std::vector<BoundingBox>& boxes,
                                  const BinaryMask& mask, const std::vector<SeedClass>& labels,
                                  std::size_t target_size = 64);

/// Bilinear resize with pixel-centre sampling: output pixel i samples source
/// coordinate (i + 0.5) * h / H - 0.5, clamped to [0, h - 1].
Image resize_bilinear(const Image& src, std::size_t out_rows, std::size_t out_cols);

/// Nearest-neighbour resize: output pixel i takes source floor((i + 0.5) * h / H).
BinaryMask resize_nearest(const BinaryMask& src, std::size_t out_rows, std::size_t out_cols);

/// The ROI's mask: pixels nonzero in any band.
BinaryMask roi_support(const SeedROI& roi);

/// ROIs persist as native cube files with label/seed/box in the header
/// attributes, one file per seed named seed_<id>.cube.
void save_roi(const SeedROI& roi, const std::filesystem::path& path);
SeedROI load_roi(const std::filesystem::path& path);
void save_roi_dir(const std::vector<SeedROI>& rois, const std::filesystem::path& dir);
/// Loads every *.cube in the directory, ordered by seed id.
std::vector<SeedROI> load_roi_dir(const std::filesystem::path& dir);

/// Labels file: one "seed_index,label" line per seed (index 0-based in box
/// order, label haploid|diploid); '#' lines are comments.
std::vector<SeedClass> load_labels(const std::filesystem::path& path, std::size_t expected);

}  // namespace hsi
