#pragma once

#include <vector>

#include "fedad/errors.hpp"
#include "fedad/model.hpp"

namespace fedad {

// Per-dimension Gaussian outlier model (mean + biased variance).
struct GaussianBaseline {
  std::vector<double> mu;
  std::vector<double> sigma2;  // floored at 1e-12
};

GaussianBaseline fit_gaussian_baseline(
    const std::vector<std::vector<double>>& data);

// Product of univariate normal densities.
double gaussian_probability(const std::vector<double>& x,
                            const GaussianBaseline& g);

// Error-vector Normal model with a decision threshold on the normalized
// score scale.
struct AnomalyModel {
  std::vector<double> mu;
  std::vector<std::vector<double>> cov;  // regularized, SPD
  bool diagonal = false;
  double threshold = 1.0;  // on normalized scores in [0,1]
  double theta = 0.05;
  double score_min = 0.0;  // normalization fitted with the threshold
  double score_max = 1.0;

  double normalize_score(double raw) const;
};

// Elementwise |prediction - actual|, row-major flattened.
std::vector<double> error_vector(const Mat& prediction, const Mat& actual);

// MLE mean and (biased) covariance over the error vectors, regularized by
// +eps*I with eps = 1e-6 * trace / dim (floored at 1e-12 so the matrix is
// SPD even for identical inputs). diagonal mode keeps only the variances.
void fit_anomaly_model(const std::vector<std::vector<double>>& errors,
                       AnomalyModel& model, bool diagonal = false);

// Mahalanobis quadratic form (beta - mu)^T cov^-1 (beta - mu).
double anomaly_score(const std::vector<double>& beta, const AnomalyModel& model);

struct ThresholdResult {
  double threshold = 1.0;  // normalized
  double f_theta = 0.0;
  double score_min = 0.0;
  double score_max = 1.0;
};

// Min-max normalizes the raw scores, sweeps midpoint candidates (plus 0
// and 1), and returns the threshold maximizing F_theta; ties go to the
// smaller threshold. Classification rule: normalized score >= threshold.
ThresholdResult select_threshold(
    const std::vector<std::pair<double, bool>>& scored, double theta);

struct EvalReport {
  double rmse = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_theta = 0.0;
  long tp = 0, fp = 0, tn = 0, fn = 0;
  bool precision_defined = true;  // false when no positive predictions
};

struct WindowScore {
  std::int64_t start_index = 0;
  double score = 0.0;  // normalized
  bool label = false;
  bool decision = false;
};

// RMSE over all predicted points plus confusion counts from the model's
// threshold rule. predictions/actuals/labels are index-aligned.
EvalReport evaluate(const std::vector<Mat>& predictions,
                    const std::vector<Mat>& actuals,
                    const std::vector<bool>& labels, const AnomalyModel& model,
                    double theta, std::vector<WindowScore>* scores = nullptr);

double f_beta(double precision, double recall, double theta);

}  // namespace fedad
