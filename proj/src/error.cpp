#include "hsi/error.hpp"

namespace hsi {

CalibrationError::CalibrationError(std::size_t row, std::size_t col, std::size_t band)
    : Error("calibration: white equals dark at (row " + std::to_string(row) + ", col " +
            std::to_string(col) + ", band " + std::to_string(band) + ")"),
      row_(row),
      col_(col),
      band_(band) {}

TrainingError::TrainingError(long iteration)
    : Error("training: non-finite loss at iteration " + std::to_string(iteration)),
      iteration_(iteration) {}

StageError::StageError(std::string stage, const std::string& cause)
    : Error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)) {}

}  // namespace hsi
