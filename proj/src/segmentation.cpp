#include "hsi/segmentation.hpp"

#include <algorithm>
#include <tuple>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hsi {

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

std::string to_string(SeedClass label) { return label == SeedClass::haploid ? "haploid" : "diploid"; }

SeedClass seed_class_from_string(const std::string& text) {
    if (text == "haploid" || text == "0") return SeedClass::haploid;
    if (text == "diploid" || text == "1") return SeedClass::diploid;
    throw FormatError("unknown seed label '" + text + "' (expected haploid or diploid)");
}

double estimate_background_threshold(const Image& band_image, std::size_t margin, double percentile) {
    if (margin < 1) throw std::invalid_argument("background threshold: margin must be >= 1");
    if (!(percentile > 0.0 && percentile <= 1.0)) {
        throw std::invalid_argument("background threshold: percentile must be in (0, 1]");
    }
    if (2 * margin >= band_image.rows || 2 * margin >= band_image.cols) {
        throw std::invalid_argument("background threshold: margin " + std::to_string(margin) +
                                    " leaves no interior in a " + std::to_string(band_image.rows) + "x" +
                                    std::to_string(band_image.cols) + " image");
    }
    std::vector<double> ring;
    ring.reserve(2 * margin * (band_image.rows + band_image.cols));
    for (std::size_t r = 0; r < band_image.rows; ++r) {
        const bool edge_row = r < margin || r >= band_image.rows - margin;
        for (std::size_t c = 0; c < band_image.cols; ++c) {
            if (edge_row || c < margin || c >= band_image.cols - margin) ring.push_back(band_image(r, c));
        }
    }
    if (percentile == 1.0) return *std::max_element(ring.begin(), ring.end());
    auto rank = static_cast<std::size_t>(std::ceil(percentile * static_cast<double>(ring.size())));
    rank = std::clamp<std::size_t>(rank, 1, ring.size());
    std::nth_element(ring.begin(), ring.begin() + static_cast<std::ptrdiff_t>(rank - 1), ring.end());
    return ring[rank - 1];
}

BinaryMask binarize(const Image& band_image, double threshold) {
    BinaryMask mask(band_image.rows, band_image.cols);
    for (std::size_t i = 0; i < band_image.pixels.size(); ++i) mask.data[i] = band_image.pixels[i] > threshold;
    return mask;
}

std::vector<BoundingBox> extract_bounding_boxes(const BinaryMask& mask, std::size_t min_area) {
    std::vector<BoundingBox> boxes;
    std::vector<std::uint8_t> seen(mask.data.size(), 0);
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < mask.data.size(); ++start) {
        if (!mask.data[start] || seen[start]) continue;
        BoundingBox box{start / mask.cols, start / mask.cols, start % mask.cols, start % mask.cols};
        std::size_t area = 0;
        seen[start] = 1;
        stack.assign(1, start);
        while (!stack.empty()) {
            const std::size_t idx = stack.back();
            stack.pop_back();
            ++area;
            const std::size_t r = idx / mask.cols;
            const std::size_t c = idx % mask.cols;
            box.row_min = std::min(box.row_min, r);
            box.row_max = std::max(box.row_max, r);
            box.col_min = std::min(box.col_min, c);
            box.col_max = std::max(box.col_max, c);
            const std::size_t r0 = r == 0 ? 0 : r - 1;
            const std::size_t c0 = c == 0 ? 0 : c - 1;
            const std::size_t r1 = std::min(r + 1, mask.rows - 1);
            const std::size_t c1 = std::min(c + 1, mask.cols - 1);
            for (std::size_t rr = r0; rr <= r1; ++rr) {
                for (std::size_t cc = c0; cc <= c1; ++cc) {
                    const std::size_t n = rr * mask.cols + cc;
                    if (mask.data[n] && !seen[n]) {
                        seen[n] = 1;
                        stack.push_back(n);
                    }
                }
            }
        }
        if (area >= min_area) boxes.push_back(box);
    }
    std::sort(boxes.begin(), boxes.end(), [](const BoundingBox& a, const BoundingBox& b) {
        return std::tie(a.row_min, a.col_min) < std::tie(b.row_min, b.col_min);
    });
    return boxes;
}

Image resize_bilinear(const Image& src, std::size_t out_rows, std::size_t out_cols) {
    if (src.empty() || out_rows == 0 || out_cols == 0) throw ShapeError("resize: empty image");
    Image out(out_rows, out_cols);
    const double sy = static_cast<double>(src.rows) / static_cast<double>(out_rows);
    const double sx = static_cast<double>(src.cols) / static_cast<double>(out_cols);
    const auto coord = [](std::size_t i, double scale, std::size_t n, std::size_t& i0, std::size_t& i1,
                          double& t) {
        double x = (static_cast<double>(i) + 0.5) * scale - 0.5;
        x = std::clamp(x, 0.0, static_cast<double>(n - 1));
        i0 = static_cast<std::size_t>(std::floor(x));
        i1 = std::min(i0 + 1, n - 1);
        t = x - static_cast<double>(i0);
    };
    for (std::size_t i = 0; i < out_rows; ++i) {
        std::size_t y0, y1;
        double ty;
        coord(i, sy, src.rows, y0, y1, ty);
        for (std::size_t j = 0; j < out_cols; ++j) {
            std::size_t x0, x1;
            double tx;
            coord(j, sx, src.cols, x0, x1, tx);
            const double top = src(y0, x0) * (1.0 - tx) + src(y0, x1) * tx;
            const double bottom = src(y1, x0) * (1.0 - tx) + src(y1, x1) * tx;
            out(i, j) = top * (1.0 - ty) + bottom * ty;
        }
    }
    return out;
}

BinaryMask resize_nearest(const BinaryMask& src, std::size_t out_rows, std::size_t out_cols) {
    if (src.data.empty() || out_rows == 0 || out_cols == 0) throw ShapeError("resize: empty mask");
    BinaryMask out(out_rows, out_cols);
    for (std::size_t i = 0; i < out_rows; ++i) {
        const std::size_t si = std::min(src.rows - 1, (2 * i + 1) * src.rows / (2 * out_rows));
        for (std::size_t j = 0; j < out_cols; ++j) {
            const std::size_t sj = std::min(src.cols - 1, (2 * j + 1) * src.cols / (2 * out_cols));
            out.set(i, j, src(si, sj));
        }
    }
    return out;
}

std::vector<SeedROI> extract_rois(const HyperCube& cube, const std::vector<BoundingBox>& boxes,
                                  const BinaryMask& mask, const std::vector<SeedClass>& labels,
                                  std::size_t target_size) {
    if (labels.size() != boxes.size()) throw ShapeError("extract_rois: one label per box required");
    if (mask.rows != cube.rows() || mask.cols != cube.cols()) {
        throw ShapeError("extract_rois: mask shape does not match the cube");
    }
    if (target_size < 1) throw std::invalid_argument("extract_rois: target size must be >= 1");
    std::vector<SeedROI> rois;
    rois.reserve(boxes.size());
    for (std::size_t k = 0; k < boxes.size(); ++k) {
        const BoundingBox& box = boxes[k];
        if (box.row_min > box.row_max || box.col_min > box.col_max || box.row_max >= cube.rows() ||
            box.col_max >= cube.cols()) {
            throw ShapeError("extract_rois: box " + std::to_string(k) + " lies outside the cube");
        }
        BinaryMask crop_mask(box.height(), box.width());
        for (std::size_t r = 0; r < box.height(); ++r)
            for (std::size_t c = 0; c < box.width(); ++c)
                crop_mask.set(r, c, mask(box.row_min + r, box.col_min + c));
        const BinaryMask small_mask = resize_nearest(crop_mask, target_size, target_size);

        CubeMeta meta = cube.meta();
        meta.attributes.clear();
        HyperCube stack(target_size, target_size, cube.bands(), cube.wavelengths(), meta);
        Image crop(box.height(), box.width());
        for (std::size_t b = 0; b < cube.bands(); ++b) {
            for (std::size_t r = 0; r < box.height(); ++r)
                for (std::size_t c = 0; c < box.width(); ++c)
                    crop(r, c) = crop_mask(r, c) ? cube.at(box.row_min + r, box.col_min + c, b) : 0.0;
            const Image resized = resize_bilinear(crop, target_size, target_size);
            auto plane = stack.band_plane(b);
            for (std::size_t i = 0; i < plane.size(); ++i)
                plane[i] = small_mask.data[i] ? static_cast<float>(resized.pixels[i]) : 0.0f;
        }
        SeedROI roi;
        roi.stack = std::move(stack);
        roi.label = labels[k];
        roi.seed_id = static_cast<int>(k);
        roi.source_box = box;
        roi.cultivar = cube.meta().cultivar;
        rois.push_back(std::move(roi));
    }
    return rois;
}

BinaryMask roi_support(const SeedROI& roi) {
    BinaryMask m(roi.stack.rows(), roi.stack.cols());
    for (std::size_t b = 0; b < roi.stack.bands(); ++b) {
        const auto plane = roi.stack.band_plane(b);
        for (std::size_t i = 0; i < plane.size(); ++i)
            if (plane[i] != 0.0f) m.data[i] = 1;
    }
    return m;
}

void save_roi(const SeedROI& roi, const std::filesystem::path& path) {
    HyperCube cube = roi.stack;
    auto& attrs = cube.meta().attributes;
    attrs["label"] = to_string(roi.label);
    attrs["seed_id"] = std::to_string(roi.seed_id);
    const auto& b = roi.source_box;
    attrs["source_box"] = std::to_string(b.row_min) + "," + std::to_string(b.row_max) + "," +
                          std::to_string(b.col_min) + "," + std::to_string(b.col_max);
    cube.meta().cultivar = roi.cultivar;
    save_cube(cube, path);
}

SeedROI load_roi(const std::filesystem::path& path) {
    HyperCube cube = load_cube(path);
    auto& attrs = cube.meta().attributes;
    const auto need = [&](const char* key) -> const std::string& {
        auto it = attrs.find(key);
        if (it == attrs.end()) throw FormatError("roi '" + path.string() + "': missing attribute " + key);
        return it->second;
    };
    SeedROI roi;
    roi.label = seed_class_from_string(need("label"));
    try {
        roi.seed_id = std::stoi(need("seed_id"));
    } catch (const std::logic_error&) {
        throw FormatError("roi '" + path.string() + "': bad seed_id");
    }
    std::istringstream box(need("source_box"));
    char comma = 0;
    if (!(box >> roi.source_box.row_min >> comma >> roi.source_box.row_max >> comma >>
          roi.source_box.col_min >> comma >> roi.source_box.col_max)) {
        throw FormatError("roi '" + path.string() + "': bad source_box");
    }
    roi.cultivar = cube.meta().cultivar;
    attrs.erase("label");
    attrs.erase("seed_id");
    attrs.erase("source_box");
    roi.stack = std::move(cube);
    return roi;
}

void save_roi_dir(const std::vector<SeedROI>& rois, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& roi : rois) {
        save_roi(roi, dir / ("seed_" + std::to_string(roi.seed_id) + ".cube"));
    }
}

std::vector<SeedROI> load_roi_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error("ROI directory '" + dir.string() + "' not found");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".cube") files.push_back(entry.path());
    }
    std::vector<SeedROI> rois;
    rois.reserve(files.size());
    for (const auto& f : files) rois.push_back(load_roi(f));
    std::sort(rois.begin(), rois.end(), [](const SeedROI& a, const SeedROI& b) { return a.seed_id < b.seed_id; });
    for (std::size_t i = 1; i < rois.size(); ++i) {
        if (rois[i].seed_id == rois[i - 1].seed_id) {
            throw FormatError("ROI directory holds seed id " + std::to_string(rois[i].seed_id) + " twice");
        }
    }
    return rois;
}

std::vector<SeedClass> load_labels(const std::filesystem::path& path, std::size_t expected) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open labels file '" + path.string() + "'");
    std::vector<std::pair<std::size_t, SeedClass>> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw FormatError("labels: expected 'index,label' in '" + line + "'");
        std::size_t index = 0;
        try {
            index = std::stoul(line.substr(0, comma));
        } catch (const std::logic_error&) {
            throw FormatError("labels: bad index in '" + line + "'");
        }
        entries.emplace_back(index, seed_class_from_string(line.substr(comma + 1)));
    }
    std::vector<SeedClass> labels(expected, SeedClass::haploid);
    std::vector<bool> seen(expected, false);
    for (const auto& [index, label] : entries) {
        if (index >= expected || seen[index]) {
            throw FormatError("labels: index " + std::to_string(index) + " is out of range or repeated");
        }
        seen[index] = true;
        labels[index] = label;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
        throw FormatError("labels: file covers fewer seeds than the " + std::to_string(expected) + " found");
    }
    return labels;
}

}  // namespace hsi
