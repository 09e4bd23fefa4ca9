#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ecorank {

enum class ErrorCode {
  MissingFile,
  MissingColumn,
  BadValue,
  DuplicateId,
  NoOverlap,
  ZeroArea,
  DegenerateDesign,
  ZeroDegreeDays,
  MissingLocation,
  InsufficientCohort,
  MissingEcdf,
  EmptyGroup,
  IdMismatch,
  BadSpec,
  MissingPosterior,
  NonConvergence,
  Unfittable,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this type; the code is stable and
// is what the CLI maps to exit codes and JSON error payloads.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Row-numbered ingestion failure. Rows count from 1 for the header line.
class BadValueError : public Error {
 public:
  BadValueError(std::size_t row, std::string column, const std::string& detail);

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

}  // namespace ecorank
