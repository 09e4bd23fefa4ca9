#include "ecorank/errors.hpp"

namespace ecorank {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::BadValue: return "BadValue";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::ZeroArea: return "ZeroArea";
    case ErrorCode::DegenerateDesign: return "DegenerateDesign";
    case ErrorCode::ZeroDegreeDays: return "ZeroDegreeDays";
    case ErrorCode::MissingLocation: return "MissingLocation";
    case ErrorCode::InsufficientCohort: return "InsufficientCohort";
    case ErrorCode::MissingEcdf: return "MissingEcdf";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::MissingPosterior: return "MissingPosterior";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::Unfittable: return "Unfittable";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

BadValueError::BadValueError(std::size_t row, std::string column, const std::string& detail)
    : Error(ErrorCode::BadValue,
            "row " + std::to_string(row) + ", column '" + column + "': " + detail),
      row_(row),
      column_(std::move(column)) {}

}  // namespace ecorank
