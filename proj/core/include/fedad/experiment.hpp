#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedad/anomaly.hpp"
#include "fedad/federation.hpp"
#include "fedad/synthetic.hpp"
#include "fedad/timeseries.hpp"

namespace fedad {

struct DatasetConfig {
  std::optional<std::string> csv;
  int dims = 1;
  bool has_labels = true;
  std::optional<SyntheticConfig> synthetic;
};

struct ExperimentConfig {
  std::string mode = "train";  // train | sweep-rho | compare-comm | eval
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  DatasetConfig dataset;
  int window = 20;
  double train_frac = 0.6;
  double val_frac = 0.1;
  ArchConfig arch;
  FederationConfig federation;
  double theta = 0.05;
  bool diagonal_cov = false;
  std::vector<double> sweep_rhos = {0.1, 0.3, 1.0, 100.0};
  double target_loss = 0.02;
  std::optional<std::string> checkpoint;  // eval mode input
};

// Throws ConfigError with the offending field path.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

struct PreparedData {
  RawSeries normalized;
  NormalizationParams norm;
  std::vector<NodePartition> partitions;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

struct DetectionResult {
  AnomalyModel model;
  EvalReport eval;
  std::vector<WindowScore> scores;  // test windows, by start_index
};

// Fits the error Gaussian on normal validation windows, selects the
// F_theta-maximizing threshold on validation scores, then evaluates the
// pooled test windows.
DetectionResult detect(const ParameterSet& params, const ExperimentConfig& cfg,
                       const std::vector<NodePartition>& partitions);

struct TrainOutcome {
  TrainingResult training;
  DetectionResult detection;
};

TrainOutcome run_train(const ExperimentConfig& cfg, bool capture_updates = false);

struct SweepRow {
  double rho = 0.0;
  double rmse = 0.0;
  double accuracy = 0.0;
  double f_theta = 0.0;
  std::uint64_t uplink_bytes = 0;
  double compression_ratio = 1.0;  // bytes(rho=100) / bytes(rho)
};

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg);

struct CommVariant {
  std::string name;  // "with-gcm" / "without-gcm"
  double rho = 100.0;
  bool reached = false;
  int rounds_to_target = -1;
  std::uint64_t uplink_bytes = 0;
  std::vector<SparseUpdate> updates;  // for auditing the byte ledger
};

// Runs the same seeded experiment with and without compression and
// reports rounds-to-target-loss and total uplink bytes side by side.
std::vector<CommVariant> compare_comm(const ExperimentConfig& cfg);

nlohmann::json eval_to_json(const EvalReport& rep, const AnomalyModel& model);

// Dispatches on cfg.mode and writes all artifacts under cfg.out_dir.
// Returns 0 on success; config problems throw ConfigError.
int run_experiment(const ExperimentConfig& cfg);

}  // namespace fedad
