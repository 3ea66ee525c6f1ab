#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hsi {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file header, payload size mismatch, non-finite payload values.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Tensor, image or cube dimensions that do not fit together.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A calibration cell where white == dark.
class CalibrationError : public Error {
public:
    CalibrationError(std::size_t row, std::size_t col, std::size_t band);

    std::size_t row() const noexcept { return row_; }
    std::size_t col() const noexcept { return col_; }
    std::size_t band() const noexcept { return band_; }

private:
    std::size_t row_;
    std::size_t col_;
    std::size_t band_;
};

/// Training produced a non-finite loss.
class TrainingError : public Error {
public:
    explicit TrainingError(long iteration);

    long iteration() const noexcept { return iteration_; }

private:
    long iteration_;
};

/// Invalid or inconsistent configuration value.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Failure inside one pipeline stage; carries the stage name.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& cause);

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace hsi
