#pragma once

#include <cstdint>

#include "fedad/timeseries.hpp"

namespace fedad {

// Sine-wave sensor data with seeded Gaussian noise and injected spike and
// level-shift anomalies. Values stay roughly in [0,1]; labels mark every
// affected point.
struct SyntheticConfig {
  int points = 5000;
  int dims = 1;
  double anomaly_frac = 0.02;
  double noise = 0.02;
  double period = 50.0;
  std::uint64_t seed = 1;
};

RawSeries make_synthetic(const SyntheticConfig& cfg);

}  // namespace fedad
