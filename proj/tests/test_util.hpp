#pragma once

#include <random>

#include "fedad/model.hpp"

namespace fedad::testutil {

// MSE computed independently of backward(), for finite-difference oracles.
inline double mse(const std::vector<double>& pred, const std::vector<double>& target) {
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

inline double loss_at(const Mat& history, const Mat& target,
                      const ArchConfig& cfg, ParameterSet params,
                      const std::vector<double>& flat, double lambda = 0.0) {
  params.unflatten(flat);
  auto fwd = forward(history, params, cfg);
  double loss = mse(fwd.prediction.d, target.d);
  if (lambda != 0.0) {
    double sumsq = 0.0;
    for (double w : flat) sumsq += w * w;
    loss += lambda * sumsq;
  }
  return loss;
}

// Small but varied architectures for gradient checking.
inline ArchConfig random_tiny_config(std::mt19937_64& rng) {
  ArchConfig cfg;
  cfg.dims = 1 + int(rng() % 2);
  cfg.window = 2 + int(rng() % 3);  // T in [2,4]
  cfg.lstm_hidden = 1 + int(rng() % 3);
  ConvSpec conv;
  conv.kernel = (cfg.window >= 3 && rng() % 2) ? 3 : 1;
  conv.channels = 1 + int(rng() % 3);
  int n = cfg.window - conv.kernel + 1;
  conv.pool = (n >= 2 && rng() % 2) ? 2 : 1;
  n /= conv.pool;
  cfg.cnn = {conv};
  cfg.attention = rng() % 2 == 0;
  ConvSpec stage{1, 1 + int(rng() % 2), 1};
  if (n >= 2 && rng() % 2) stage.pool = 2;
  cfg.attention_stages = {stage};
  return cfg;
}

inline Mat random_mat(int rows, int cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Mat m(rows, cols);
  for (auto& v : m.d) v = dist(rng);
  return m;
}

}  // namespace fedad::testutil
