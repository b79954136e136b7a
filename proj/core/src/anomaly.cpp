#include "fedad/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fedad {

namespace {

constexpr double kVarianceFloor = 1e-12;

// Lower-triangular Cholesky factor; throws if the matrix is not SPD.
std::vector<std::vector<double>> cholesky(
    const std::vector<std::vector<double>>& a) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> l(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = a[i][j];
      for (std::size_t k = 0; k < j; ++k) sum -= l[i][k] * l[j][k];
      if (i == j) {
        if (sum <= 0.0)
          throw SingularCovarianceError("covariance is not positive definite");
        l[i][i] = std::sqrt(sum);
      } else {
        l[i][j] = sum / l[j][j];
      }
    }
  }
  return l;
}

}  // namespace

GaussianBaseline fit_gaussian_baseline(
    const std::vector<std::vector<double>>& data) {
  if (data.empty()) throw EmptyDataError("no samples to fit");
  const std::size_t d = data[0].size();
  const double m = static_cast<double>(data.size());
  GaussianBaseline g;
  g.mu.assign(d, 0.0);
  g.sigma2.assign(d, 0.0);
  for (const auto& x : data) {
    if (x.size() != d) throw DimensionMismatchError("ragged sample dimensions");
    for (std::size_t j = 0; j < d; ++j) g.mu[j] += x[j];
  }
  for (auto& v : g.mu) v /= m;
  for (const auto& x : data)
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = x[j] - g.mu[j];
      g.sigma2[j] += diff * diff;
    }
  for (auto& v : g.sigma2) v = std::max(v / m, kVarianceFloor);
  return g;
}

double gaussian_probability(const std::vector<double>& x,
                            const GaussianBaseline& g) {
  if (x.size() != g.mu.size())
    throw DimensionMismatchError("sample dimension does not match model");
  double p = 1.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double diff = x[j] - g.mu[j];
    p *= std::exp(-diff * diff / (2.0 * g.sigma2[j])) /
         (std::sqrt(2.0 * std::numbers::pi) * std::sqrt(g.sigma2[j]));
  }
  return p;
}

std::vector<double> error_vector(const Mat& prediction, const Mat& actual) {
  if (prediction.rows != actual.rows || prediction.cols != actual.cols)
    throw ShapeMismatchError("prediction/actual shapes differ");
  std::vector<double> beta(prediction.d.size());
  for (std::size_t i = 0; i < beta.size(); ++i)
    beta[i] = std::abs(prediction.d[i] - actual.d[i]);
  return beta;
}

void fit_anomaly_model(const std::vector<std::vector<double>>& errors,
                       AnomalyModel& model, bool diagonal) {
  if (errors.size() < 2)
    throw TooFewSamplesError("need at least 2 error vectors");
  const std::size_t d = errors[0].size();
  const double n = static_cast<double>(errors.size());
  model.diagonal = diagonal;
  model.mu.assign(d, 0.0);
  for (const auto& e : errors) {
    if (e.size() != d) throw DimensionMismatchError("ragged error vectors");
    for (std::size_t j = 0; j < d; ++j) model.mu[j] += e[j];
  }
  for (auto& v : model.mu) v /= n;

  model.cov.assign(d, std::vector<double>(d, 0.0));
  for (const auto& e : errors)
    for (std::size_t i = 0; i < d; ++i) {
      const double di = e[i] - model.mu[i];
      if (diagonal) {
        model.cov[i][i] += di * di;
      } else {
        for (std::size_t j = i; j < d; ++j)
          model.cov[i][j] += di * (e[j] - model.mu[j]);
      }
    }
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      model.cov[i][j] /= n;
      model.cov[j][i] = model.cov[i][j];
    }
    trace += model.cov[i][i];
  }
  const double eps =
      std::max(kVarianceFloor, 1e-6 * trace / static_cast<double>(d));
  for (std::size_t i = 0; i < d; ++i) model.cov[i][i] += eps;
}

double anomaly_score(const std::vector<double>& beta, const AnomalyModel& model) {
  const std::size_t d = model.mu.size();
  if (beta.size() != d)
    throw DimensionMismatchError("error vector dimension does not match model");
  std::vector<double> diff(d);
  for (std::size_t j = 0; j < d; ++j) diff[j] = beta[j] - model.mu[j];
  if (model.diagonal) {
    double score = 0.0;
    for (std::size_t j = 0; j < d; ++j)
      score += diff[j] * diff[j] / model.cov[j][j];
    return score;
  }
  const auto l = cholesky(model.cov);
  // forward substitution: L y = diff; score = ||y||^2
  std::vector<double> y(d);
  for (std::size_t i = 0; i < d; ++i) {
    double sum = diff[i];
    for (std::size_t k = 0; k < i; ++k) sum -= l[i][k] * y[k];
    y[i] = sum / l[i][i];
  }
  double score = 0.0;
  for (double v : y) score += v * v;
  return score;
}

double AnomalyModel::normalize_score(double raw) const {
  const double range = score_max - score_min;
  return range > 0.0 ? (raw - score_min) / range : 0.0;
}

double f_beta(double precision, double recall, double theta) {
  if (precision + recall <= 0.0) return 0.0;
  const double t2 = theta * theta;
  const double denom = t2 * precision + recall;
  return denom > 0.0 ? (1.0 + t2) * precision * recall / denom : 0.0;
}

ThresholdResult select_threshold(
    const std::vector<std::pair<double, bool>>& scored, double theta) {
  bool any_pos = false, any_neg = false;
  for (const auto& [s, lab] : scored) (lab ? any_pos : any_neg) = true;
  if (!any_pos || !any_neg)
    throw DegenerateLabelsError(
        "threshold selection needs both normal and anomalous samples");

  double lo = scored[0].first, hi = scored[0].first;
  for (const auto& [s, lab] : scored) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  const double range = hi - lo;
  std::vector<std::pair<double, bool>> norm;
  norm.reserve(scored.size());
  for (const auto& [s, lab] : scored)
    norm.emplace_back(range > 0.0 ? (s - lo) / range : 0.0, lab);

  std::vector<double> values;
  values.reserve(norm.size());
  for (const auto& [s, lab] : norm) values.push_back(s);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());

  std::vector<double> candidates{0.0, 1.0};
  for (std::size_t i = 0; i + 1 < values.size(); ++i)
    candidates.push_back(0.5 * (values[i] + values[i + 1]));
  std::sort(candidates.begin(), candidates.end());

  ThresholdResult best;
  best.score_min = lo;
  best.score_max = range > 0.0 ? hi : lo + 1.0;
  best.f_theta = -1.0;
  for (double t : candidates) {
    long tp = 0, fp = 0, fn = 0;
    for (const auto& [s, lab] : norm) {
      const bool pred = s >= t;
      if (pred && lab) ++tp;
      else if (pred && !lab) ++fp;
      else if (!pred && lab) ++fn;
    }
    const double p = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    const double f = f_beta(p, r, theta);
    if (f > best.f_theta) {
      best.f_theta = f;
      best.threshold = t;
    }
  }
  return best;
}

EvalReport evaluate(const std::vector<Mat>& predictions,
                    const std::vector<Mat>& actuals,
                    const std::vector<bool>& labels, const AnomalyModel& model,
                    double theta, std::vector<WindowScore>* scores) {
  if (predictions.size() != actuals.size() ||
      predictions.size() != labels.size())
    throw LengthMismatchError("predictions/actuals/labels length mismatch");

  EvalReport rep;
  double sq_sum = 0.0;
  std::size_t point_count = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto beta = error_vector(predictions[i], actuals[i]);
    for (double b : beta) sq_sum += b * b;
    point_count += beta.size();

    const double norm = model.normalize_score(anomaly_score(beta, model));
    const bool decision = norm >= model.threshold;
    if (scores)
      scores->push_back({static_cast<std::int64_t>(i), norm, labels[i],
                         decision});
    if (decision && labels[i]) ++rep.tp;
    else if (decision && !labels[i]) ++rep.fp;
    else if (!decision && labels[i]) ++rep.fn;
    else ++rep.tn;
  }
  rep.rmse = point_count > 0 ? std::sqrt(sq_sum / point_count) : 0.0;
  const long total = rep.tp + rep.fp + rep.tn + rep.fn;
  rep.accuracy = total > 0 ? static_cast<double>(rep.tp + rep.tn) / total : 0.0;
  if (rep.tp + rep.fp > 0) {
    rep.precision = static_cast<double>(rep.tp) / (rep.tp + rep.fp);
  } else {
    rep.precision = 0.0;
    rep.precision_defined = false;
  }
  rep.recall = rep.tp + rep.fn > 0
                   ? static_cast<double>(rep.tp) / (rep.tp + rep.fn)
                   : 0.0;
  rep.f_theta = f_beta(rep.precision, rep.recall, theta);
  return rep;
}

}  // namespace fedad
