#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hsi/error.hpp"

namespace hsi {

/// Row-major single-channel image of doubles.
struct Image {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> pixels;

    Image() = default;
    Image(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), pixels(r * c, fill) {}
    Image(std::size_t r, std::size_t c, std::vector<double> values)
        : rows(r), cols(c), pixels(std::move(values)) {
        if (pixels.size() != rows * cols) throw ShapeError("image: pixel count does not match rows*cols");
    }

    double& operator()(std::size_t r, std::size_t c) { return pixels[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return pixels[r * cols + c]; }

    std::span<const double> row(std::size_t r) const { return {pixels.data() + r * cols, cols}; }

    bool empty() const noexcept { return pixels.empty(); }
    std::size_t size() const noexcept { return pixels.size(); }

    friend bool operator==(const Image&, const Image&) = default;
};

}  // namespace hsi
