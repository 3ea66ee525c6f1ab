#pragma once

// Hyperspectral cubes: storage, native/CSV file formats, radiometric
// calibration against dark/white references, band-to-wavelength mapping.
//
// Cube accessors use 0-based band offsets. "Band numbers" (wavelength_of,
// BandInterval, CLI flags) are 1-based.

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hsi/image.hpp"

namespace hsi {

struct CubeMeta {
    std::string cultivar;
    std::string acquisition_id;
    bool calibrated = false;
    /// Free-form string attributes carried through the file header.
    std::map<std::string, std::string> attributes;

    friend bool operator==(const CubeMeta&, const CubeMeta&) = default;
};

/// rows x cols x bands reflectance (or raw counts) in 32-bit storage,
/// band-sequential in memory: index = (band * rows + row) * cols + col.
class HyperCube {
public:
    HyperCube() = default;

    /// Zero-filled cube.
    HyperCube(std::size_t rows, std::size_t cols, std::size_t bands, std::vector<double> wavelengths,
              CubeMeta meta = {});

    /// Takes band-sequential data; validates every invariant.
    HyperCube(std::size_t rows, std::size_t cols, std::size_t bands, std::vector<float> data,
              std::vector<double> wavelengths, CubeMeta meta = {});

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t bands() const noexcept { return bands_; }
    std::size_t pixels_per_band() const noexcept { return rows_ * cols_; }

    float at(std::size_t row, std::size_t col, std::size_t band) const {
        return data_[(band * rows_ + row) * cols_ + col];
    }
    void set(std::size_t row, std::size_t col, std::size_t band, float value) {
        data_[(band * rows_ + row) * cols_ + col] = value;
    }

    std::span<const float> band_plane(std::size_t band) const {
        return {data_.data() + band * rows_ * cols_, rows_ * cols_};
    }
    std::span<float> band_plane(std::size_t band) {
        return {data_.data() + band * rows_ * cols_, rows_ * cols_};
    }

    /// One band as a double image.
    Image band_image(std::size_t band) const;

    std::span<const float> data() const noexcept { return data_; }
    std::span<float> data() noexcept { return data_; }

    const std::vector<double>& wavelengths() const noexcept { return wavelengths_; }
    const CubeMeta& meta() const noexcept { return meta_; }
    CubeMeta& meta() noexcept { return meta_; }

    /// Throws FormatError / ShapeError when an invariant is broken.
    void validate() const;

    friend bool operator==(const HyperCube&, const HyperCube&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::size_t bands_ = 0;
    std::vector<float> data_;
    std::vector<double> wavelengths_;
    CubeMeta meta_;
};

/// Dark and white references. Each is either a full rows x cols x bands cube
/// or a single line (1 x cols x bands) broadcast over every row, as a
/// push-broom sensor records it.
struct CalibrationFrames {
    HyperCube dark;
    HyperCube white;
};

enum class CubeFormat { native, flat_csv };

/// Native: 8-byte magic "HSICUBE1", u64 little-endian header length, JSON
/// header, then rows*cols*bands little-endian float32 values band-sequential.
/// flat_csv: "# " + JSON header line, then one line per pixel (row-major) with
/// one column per band; wavelengths in the sidecar `<path>.wavelengths.csv`.
HyperCube load_cube(const std::filesystem::path& path, CubeFormat format = CubeFormat::native);
void save_cube(const HyperCube& cube, const std::filesystem::path& path,
               CubeFormat format = CubeFormat::native);

std::filesystem::path wavelength_sidecar_path(const std::filesystem::path& csv_path);

/// (raw - dark) / (white - dark) elementwise, evaluated in double.
/// Throws CalibrationError naming the first cell where white == dark.
HyperCube calibrate(const HyperCube& raw, const CalibrationFrames& frames);

inline constexpr double kDefaultFirstWavelength = 862.9;
inline constexpr double kDefaultLastWavelength = 1704.2;
inline constexpr std::size_t kDefaultBandCount = 256;

/// Linear map from band 1 -> first to band `band_count` -> last.
std::vector<double> default_wavelength_table(std::size_t band_count = kDefaultBandCount,
                                             double first = kDefaultFirstWavelength,
                                             double last = kDefaultLastWavelength);

/// Table lookup by 1-based band number; throws std::out_of_range.
double wavelength_of(std::size_t band_number, std::span<const double> table);

/// Uniform-width histogram over [lo, hi]; values equal to hi land in the
/// last bin, values outside the range are not counted.
std::vector<std::size_t> grayscale_histogram(const Image& image, std::size_t bins, double lo, double hi);

}  // namespace hsi
