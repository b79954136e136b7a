#pragma once

#include <stdexcept>
#include <string>

namespace fedad {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// --- dataset / IO ---
struct FileNotFoundError : Error {
  explicit FileNotFoundError(const std::string& path)
      : Error("file not found: " + path) {}
};
struct ParseError : Error {
  // 1-based row/column of the offending token
  int row, column;
  ParseError(int row_, int col_, const std::string& what)
      : Error("parse error at row " + std::to_string(row_) + ", column " +
              std::to_string(col_) + ": " + what),
        row(row_), column(col_) {}
};
struct EmptySeriesError : Error {
  EmptySeriesError() : Error("series is empty") {}
};
struct SeriesTooShortError : Error {
  explicit SeriesTooShortError(const std::string& msg) : Error(msg) {}
};
struct InvalidFractionsError : Error {
  explicit InvalidFractionsError(const std::string& msg) : Error(msg) {}
};
struct TooFewWindowsError : Error {
  explicit TooFewWindowsError(const std::string& msg) : Error(msg) {}
};

// --- shape / numeric ---
struct DimensionMismatchError : Error {
  explicit DimensionMismatchError(const std::string& msg) : Error(msg) {}
};
struct ShapeMismatchError : Error {
  explicit ShapeMismatchError(const std::string& msg) : Error(msg) {}
};
struct LengthMismatchError : Error {
  explicit LengthMismatchError(const std::string& msg) : Error(msg) {}
};
struct NonFiniteGradientError : Error {
  explicit NonFiniteGradientError(const std::string& msg) : Error(msg) {}
};
struct StaleTapeError : Error {
  explicit StaleTapeError(const std::string& msg) : Error(msg) {}
};

// --- compression / federation ---
struct CorruptUpdateError : Error {
  explicit CorruptUpdateError(const std::string& msg) : Error(msg) {}
};
struct MixedRoundsError : Error {
  explicit MixedRoundsError(const std::string& msg) : Error(msg) {}
};
struct EmptyPartitionError : Error {
  explicit EmptyPartitionError(const std::string& msg) : Error(msg) {}
};

// --- anomaly ---
struct EmptyDataError : Error {
  explicit EmptyDataError(const std::string& msg) : Error(msg) {}
};
struct TooFewSamplesError : Error {
  explicit TooFewSamplesError(const std::string& msg) : Error(msg) {}
};
struct DegenerateLabelsError : Error {
  explicit DegenerateLabelsError(const std::string& msg) : Error(msg) {}
};
struct SingularCovarianceError : Error {
  explicit SingularCovarianceError(const std::string& msg) : Error(msg) {}
};

// --- driver ---
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error("config: " + msg) {}
};

}  // namespace fedad
