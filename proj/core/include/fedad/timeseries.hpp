#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedad/errors.hpp"

namespace fedad {

// A multi-dimensional sensor series. points[t] has exactly `dims` entries.
// labels, when non-empty, marks anomalous time steps and matches points in
// length.
struct RawSeries {
  std::string name;
  int dims = 1;
  std::vector<std::vector<double>> points;
  std::vector<bool> labels;  // empty when the source carries no labels

  bool has_labels() const { return !labels.empty(); }
  std::size_t size() const { return points.size(); }
};

struct NormalizationParams {
  std::vector<double> min;  // per dimension
  std::vector<double> max;
};

// A (history, horizon) training pair. Both blocks are T x d, row-major,
// and the horizon starts right after the history in the source series.
struct WindowPair {
  int T = 0;
  int dims = 0;
  std::vector<double> history;  // T*d
  std::vector<double> horizon;  // T*d
  std::int64_t start_index = 0;
  bool label = false;  // true iff any horizon point is labelled anomalous
};

struct NodePartition {
  int node_id = 0;
  std::vector<WindowPair> train;
  std::vector<WindowPair> validation;
  std::vector<WindowPair> test;
};

// Reads a CSV/whitespace-separated series, one time step per line.
// Lines starting with '#' and blank lines are skipped. When has_labels is
// set, the final column is a 0/1 anomaly label.
RawSeries load_csv(const std::string& path, int dims, bool has_labels);

// Same parser over an in-memory buffer; `name` is informational only.
RawSeries parse_series(const std::string& text, int dims, bool has_labels,
                       const std::string& name);

NormalizationParams fit_normalizer(const RawSeries& series);

// Maps each value to (x - min) / (max - min). Dimensions with max == min
// map to 0.
RawSeries normalize(const RawSeries& series, const NormalizationParams& p);

// Inverse of normalize for dimensions with max > min.
RawSeries denormalize(const RawSeries& series, const NormalizationParams& p);

// All stride-1 (history, horizon) pairs; requires series length >= 2T.
std::vector<WindowPair> make_windows(const RawSeries& series, int T);

// Seeded shuffle, round-robin node assignment, then a chronological
// train/validation/test split inside each node.
std::vector<NodePartition> partition(const std::vector<WindowPair>& windows,
                                     int nodes, double train_frac,
                                     double val_frac, std::uint64_t seed);

}  // namespace fedad
