#include "fedad/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace fedad {

RawSeries make_synthetic(const SyntheticConfig& cfg) {
  if (cfg.points < 2 || cfg.dims < 1)
    throw ConfigError("synthetic series needs points >= 2 and dims >= 1");
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, cfg.noise);

  RawSeries series;
  series.name = "synthetic";
  series.dims = cfg.dims;
  series.points.resize(cfg.points);
  series.labels.assign(cfg.points, false);
  const double two_pi = 2.0 * std::numbers::pi;
  for (int t = 0; t < cfg.points; ++t) {
    auto& pt = series.points[t];
    pt.resize(cfg.dims);
    for (int j = 0; j < cfg.dims; ++j) {
      const double phase = two_pi * j / std::max(1, cfg.dims);
      pt[j] = 0.5 + 0.4 * std::sin(two_pi * t / cfg.period + phase) + noise(rng);
    }
  }

  const auto target =
      static_cast<std::size_t>(cfg.anomaly_frac * cfg.points);
  std::uniform_int_distribution<int> pos(0, cfg.points - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> spike_len(1, 3);
  std::uniform_int_distribution<int> shift_len(10, 30);
  std::size_t labelled = 0;
  while (labelled < target) {
    const bool spike = unit(rng) < 0.6;
    const int len = spike ? spike_len(rng) : shift_len(rng);
    const int start = pos(rng);
    const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
    const double amp = spike ? 0.35 + 0.25 * unit(rng) : 0.2 + 0.2 * unit(rng);
    for (int t = start; t < std::min(cfg.points, start + len); ++t) {
      for (int j = 0; j < cfg.dims; ++j) series.points[t][j] += sign * amp;
      if (!series.labels[t]) {
        series.labels[t] = true;
        ++labelled;
      }
    }
  }
  return series;
}

}  // namespace fedad
