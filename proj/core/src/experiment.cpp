#include "fedad/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "fedad/checkpoint.hpp"

namespace fedad {

namespace {

using nlohmann::json;

template <typename T>
T field_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for field '" + key + "'");
  }
}

std::vector<ConvSpec> parse_conv_list(const json& arr, const std::string& path) {
  std::vector<ConvSpec> out;
  if (!arr.is_array()) throw ConfigError(path + " must be an array");
  for (const auto& e : arr) {
    ConvSpec s;
    s.kernel = field_or<int>(e, "kernel", 3);
    s.channels = field_or<int>(e, "channels", 16);
    s.pool = field_or<int>(e, "pool", 1);
    out.push_back(s);
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig cfg;
  cfg.mode = field_or<std::string>(j, "mode", "train");
  if (cfg.mode != "train" && cfg.mode != "sweep-rho" &&
      cfg.mode != "compare-comm" && cfg.mode != "eval")
    throw ConfigError("mode must be one of train, sweep-rho, compare-comm, eval");
  cfg.seed = field_or<std::uint64_t>(j, "seed", 0);
  cfg.out_dir = field_or<std::string>(j, "out", "out");
  cfg.window = field_or<int>(j, "window", 20);
  cfg.train_frac = field_or<double>(j, "train_frac", 0.6);
  cfg.val_frac = field_or<double>(j, "val_frac", 0.1);
  cfg.theta = field_or<double>(j, "theta", 0.05);
  cfg.diagonal_cov = field_or<bool>(j, "diagonal_cov", false);
  cfg.target_loss = field_or<double>(j, "target_loss", 0.02);
  if (j.contains("sweep_rhos"))
    cfg.sweep_rhos = j.at("sweep_rhos").get<std::vector<double>>();
  if (j.contains("checkpoint"))
    cfg.checkpoint = j.at("checkpoint").get<std::string>();

  if (!j.contains("dataset")) throw ConfigError("missing field 'dataset'");
  const auto& ds = j.at("dataset");
  if (ds.contains("csv")) {
    cfg.dataset.csv = ds.at("csv").get<std::string>();
    cfg.dataset.dims = field_or<int>(ds, "dims", 1);
    cfg.dataset.has_labels = field_or<bool>(ds, "has_labels", true);
  } else if (ds.contains("synthetic")) {
    const auto& sy = ds.at("synthetic");
    SyntheticConfig sc;
    sc.points = field_or<int>(sy, "points", 5000);
    sc.dims = field_or<int>(sy, "dims", 1);
    sc.anomaly_frac = field_or<double>(sy, "anomaly_frac", 0.02);
    sc.noise = field_or<double>(sy, "noise", 0.02);
    sc.period = field_or<double>(sy, "period", 50.0);
    sc.seed = field_or<std::uint64_t>(sy, "seed", 1);
    cfg.dataset.synthetic = sc;
    cfg.dataset.dims = sc.dims;
  } else {
    throw ConfigError("dataset needs either 'csv' or 'synthetic'");
  }

  if (j.contains("arch")) {
    const auto& a = j.at("arch");
    if (a.contains("cnn")) cfg.arch.cnn = parse_conv_list(a.at("cnn"), "arch.cnn");
    cfg.arch.attention = field_or<bool>(a, "attention", true);
    if (a.contains("attention_stages"))
      cfg.arch.attention_stages =
          parse_conv_list(a.at("attention_stages"), "arch.attention_stages");
    cfg.arch.lstm_hidden = field_or<int>(a, "lstm_hidden", 32);
  }
  cfg.arch.dims = cfg.dataset.dims;
  cfg.arch.window = cfg.window;

  if (j.contains("federation")) {
    const auto& f = j.at("federation");
    cfg.federation.nodes = field_or<int>(f, "nodes", 10);
    cfg.federation.eta = field_or<double>(f, "eta", 0.001);
    cfg.federation.rounds = field_or<int>(f, "rounds", 100);
    cfg.federation.local_batch = field_or<int>(f, "batch", 128);
    cfg.federation.local_steps = field_or<int>(f, "local_steps", 1);
    cfg.federation.lambda = field_or<double>(f, "lambda", 0.0);
    if (f.contains("compressor")) {
      const auto& c = f.at("compressor");
      cfg.federation.compressor.rho = field_or<double>(c, "rho", 0.3);
      cfg.federation.compressor.momentum = field_or<double>(c, "momentum", 0.9);
      cfg.federation.compressor.warmup_rounds =
          field_or<int>(c, "warmup_rounds", 0);
      if (c.contains("clip_norm")) {
        if (c.at("clip_norm").is_null())
          cfg.federation.compressor.clip_norm.reset();
        else
          cfg.federation.compressor.clip_norm = c.at("clip_norm").get<double>();
      }
    }
  }
  cfg.federation.seed = cfg.seed;

  if (cfg.federation.compressor.rho <= 0.0 ||
      cfg.federation.compressor.rho > 100.0)
    throw ConfigError("federation.compressor.rho must be in (0, 100]");
  if (cfg.mode == "eval" && !cfg.checkpoint)
    throw ConfigError("eval mode requires 'checkpoint'");
  if (cfg.dataset.csv && !std::filesystem::exists(*cfg.dataset.csv))
    throw ConfigError("dataset.csv does not exist: " + *cfg.dataset.csv);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["mode"] = cfg.mode;
  j["seed"] = cfg.seed;
  j["out"] = cfg.out_dir;
  j["window"] = cfg.window;
  j["train_frac"] = cfg.train_frac;
  j["val_frac"] = cfg.val_frac;
  j["theta"] = cfg.theta;
  j["diagonal_cov"] = cfg.diagonal_cov;
  j["target_loss"] = cfg.target_loss;
  j["sweep_rhos"] = cfg.sweep_rhos;
  if (cfg.checkpoint) j["checkpoint"] = *cfg.checkpoint;
  if (cfg.dataset.csv) {
    j["dataset"] = {{"csv", *cfg.dataset.csv},
                    {"dims", cfg.dataset.dims},
                    {"has_labels", cfg.dataset.has_labels}};
  } else {
    const auto& s = *cfg.dataset.synthetic;
    j["dataset"] = {{"synthetic",
                     {{"points", s.points},
                      {"dims", s.dims},
                      {"anomaly_frac", s.anomaly_frac},
                      {"noise", s.noise},
                      {"period", s.period},
                      {"seed", s.seed}}}};
  }
  json cnn = json::array();
  for (const auto& l : cfg.arch.cnn)
    cnn.push_back({{"kernel", l.kernel}, {"channels", l.channels}, {"pool", l.pool}});
  json att = json::array();
  for (const auto& l : cfg.arch.attention_stages)
    att.push_back({{"kernel", l.kernel}, {"channels", l.channels}, {"pool", l.pool}});
  j["arch"] = {{"cnn", cnn},
               {"attention", cfg.arch.attention},
               {"attention_stages", att},
               {"lstm_hidden", cfg.arch.lstm_hidden}};
  json comp = {{"rho", cfg.federation.compressor.rho},
               {"momentum", cfg.federation.compressor.momentum},
               {"warmup_rounds", cfg.federation.compressor.warmup_rounds}};
  if (cfg.federation.compressor.clip_norm)
    comp["clip_norm"] = *cfg.federation.compressor.clip_norm;
  else
    comp["clip_norm"] = nullptr;
  j["federation"] = {{"nodes", cfg.federation.nodes},
                     {"eta", cfg.federation.eta},
                     {"rounds", cfg.federation.rounds},
                     {"batch", cfg.federation.local_batch},
                     {"local_steps", cfg.federation.local_steps},
                     {"lambda", cfg.federation.lambda},
                     {"compressor", comp}};
  return j;
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  RawSeries raw;
  if (cfg.dataset.synthetic) {
    raw = make_synthetic(*cfg.dataset.synthetic);
  } else {
    raw = load_csv(*cfg.dataset.csv, cfg.dataset.dims, cfg.dataset.has_labels);
  }
  // normalization statistics come from the training share of the series
  const auto cut = std::max<std::size_t>(
      1, static_cast<std::size_t>((cfg.train_frac + cfg.val_frac) * raw.size()));
  RawSeries head = raw;
  head.points.resize(std::min(cut, raw.points.size()));
  if (head.has_labels()) head.labels.resize(head.points.size());

  PreparedData out;
  out.norm = fit_normalizer(head);
  out.normalized = normalize(raw, out.norm);
  auto windows = make_windows(out.normalized, cfg.window);
  out.partitions = partition(windows, cfg.federation.nodes, cfg.train_frac,
                             cfg.val_frac, cfg.seed);
  return out;
}

DetectionResult detect(const ParameterSet& params, const ExperimentConfig& cfg,
                       const std::vector<NodePartition>& partitions) {
  const auto predict = [&](const WindowPair& w) {
    Mat history(w.T, w.dims);
    history.d = w.history;
    return forward(history, params, cfg.arch).prediction;
  };

  // pooled validation pass: errors of normal windows fit the Gaussian,
  // every window contributes a (score, label) pair for the threshold sweep
  std::vector<std::vector<double>> normal_errors;
  std::vector<std::pair<std::vector<double>, bool>> val_errors;
  for (const auto& part : partitions)
    for (const auto& w : part.validation) {
      Mat actual(w.T, w.dims);
      actual.d = w.horizon;
      auto beta = error_vector(predict(w), actual);
      if (!w.label) normal_errors.push_back(beta);
      val_errors.emplace_back(std::move(beta), w.label);
    }
  if (normal_errors.size() < 2)
    throw TooFewSamplesError("not enough normal validation windows");

  DetectionResult res;
  res.model.theta = cfg.theta;
  fit_anomaly_model(normal_errors, res.model, cfg.diagonal_cov);

  std::vector<std::pair<double, bool>> scored;
  scored.reserve(val_errors.size());
  for (const auto& [beta, label] : val_errors)
    scored.emplace_back(anomaly_score(beta, res.model), label);
  try {
    auto th = select_threshold(scored, cfg.theta);
    res.model.threshold = th.threshold;
    res.model.score_min = th.score_min;
    res.model.score_max = th.score_max;
  } catch (const DegenerateLabelsError&) {
    // single-class validation split: flag nothing below the largest
    // validation score
    double lo = scored[0].first, hi = scored[0].first;
    for (const auto& [s, lab] : scored) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    res.model.score_min = lo;
    res.model.score_max = hi > lo ? hi : lo + 1.0;
    res.model.threshold = 1.0;
  }

  std::vector<Mat> preds, actuals;
  std::vector<bool> labels;
  std::vector<std::int64_t> starts;
  for (const auto& part : partitions)
    for (const auto& w : part.test) {
      preds.push_back(predict(w));
      Mat actual(w.T, w.dims);
      actual.d = w.horizon;
      actuals.push_back(std::move(actual));
      labels.push_back(w.label);
      starts.push_back(w.start_index);
    }
  res.eval = evaluate(preds, actuals, labels, res.model, cfg.theta, &res.scores);
  for (std::size_t i = 0; i < res.scores.size(); ++i)
    res.scores[i].start_index = starts[i];
  std::sort(res.scores.begin(), res.scores.end(),
            [](const WindowScore& a, const WindowScore& b) {
              return a.start_index < b.start_index;
            });
  return res;
}

TrainOutcome run_train(const ExperimentConfig& cfg, bool capture_updates) {
  auto data = prepare_data(cfg);
  TrainOutcome out;
  out.training =
      run_training(data.partitions, cfg.arch, cfg.federation, capture_updates);
  out.detection = detect(out.training.params, cfg, data.partitions);
  return out;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg) {
  std::vector<double> rhos = cfg.sweep_rhos;
  if (std::find(rhos.begin(), rhos.end(), 100.0) == rhos.end())
    rhos.push_back(100.0);

  std::vector<SweepRow> rows;
  std::uint64_t dense_bytes = 0;
  for (double rho : rhos) {
    ExperimentConfig run_cfg = cfg;
    run_cfg.federation.compressor.rho = rho;
    auto outcome = run_train(run_cfg);
    SweepRow row;
    row.rho = rho;
    row.rmse = outcome.detection.eval.rmse;
    row.accuracy = outcome.detection.eval.accuracy;
    row.f_theta = outcome.detection.eval.f_theta;
    row.uplink_bytes = outcome.training.ledger.total_uplink();
    rows.push_back(row);
    if (rho == 100.0) dense_bytes = row.uplink_bytes;
  }
  for (auto& row : rows)
    row.compression_ratio = row.uplink_bytes > 0
                                ? static_cast<double>(dense_bytes) /
                                      static_cast<double>(row.uplink_bytes)
                                : 1.0;
  return rows;
}

std::vector<CommVariant> compare_comm(const ExperimentConfig& cfg) {
  std::vector<CommVariant> out;
  for (const bool dense : {false, true}) {
    ExperimentConfig run_cfg = cfg;
    if (dense) run_cfg.federation.compressor.rho = 100.0;
    auto data = prepare_data(run_cfg);
    auto training =
        run_training(data.partitions, run_cfg.arch, run_cfg.federation, true);
    CommVariant v;
    v.name = dense ? "without-gcm" : "with-gcm";
    v.rho = run_cfg.federation.compressor.rho;
    v.uplink_bytes = training.ledger.total_uplink();
    for (const auto& rep : training.reports)
      if (rep.mean_loss <= cfg.target_loss) {
        v.reached = true;
        v.rounds_to_target = static_cast<int>(rep.round) + 1;
        break;
      }
    v.updates = std::move(training.captured);
    out.push_back(std::move(v));
  }
  return out;
}

nlohmann::json eval_to_json(const EvalReport& rep, const AnomalyModel& model) {
  return json{{"rmse", rep.rmse},
              {"accuracy", rep.accuracy},
              {"precision", rep.precision},
              {"recall", rep.recall},
              {"f_theta", rep.f_theta},
              {"precision_defined", rep.precision_defined},
              {"tp", rep.tp},
              {"fp", rep.fp},
              {"tn", rep.tn},
              {"fn", rep.fn},
              {"threshold", model.threshold},
              {"theta", model.theta}};
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

void write_rounds(const std::filesystem::path& path,
                  const std::vector<RoundReport>& reports) {
  std::ofstream out(path);
  for (const auto& r : reports) {
    json line{{"round", r.round},
              {"mean_loss", r.mean_loss},
              {"uplink_bytes", r.uplink_bytes},
              {"downlink_bytes", r.downlink_bytes},
              {"wall_seconds", r.wall_seconds}};
    out << line.dump() << "\n";
  }
}

void write_scores(const std::filesystem::path& path,
                  const std::vector<WindowScore>& scores) {
  std::ofstream out(path);
  out << "start_index,score,label,decision\n";
  for (const auto& s : scores)
    out << s.start_index << "," << s.score << "," << (s.label ? 1 : 0) << ","
        << (s.decision ? 1 : 0) << "\n";
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const fs::path out(cfg.out_dir);
  write_text(out / "manifest.json", config_to_json(cfg).dump(2) + "\n");

  if (cfg.mode == "train") {
    auto outcome = run_train(cfg);
    write_rounds(out / "rounds.jsonl", outcome.training.reports);
    write_checkpoint((out / "checkpoint.bin").string(), outcome.training.params);
    write_text(out / "eval.json",
               eval_to_json(outcome.detection.eval, outcome.detection.model)
                       .dump(2) +
                   "\n");
    write_scores(out / "scores.csv", outcome.detection.scores);
  } else if (cfg.mode == "sweep-rho") {
    auto rows = run_sweep(cfg);
    std::ofstream csv(out / "sweep.csv");
    csv << "rho,rmse,accuracy,f_theta,uplink_bytes,compression_ratio\n";
    for (const auto& r : rows)
      csv << r.rho << "," << r.rmse << "," << r.accuracy << "," << r.f_theta
          << "," << r.uplink_bytes << "," << r.compression_ratio << "\n";
  } else if (cfg.mode == "compare-comm") {
    auto rows = compare_comm(cfg);
    std::ofstream csv(out / "compare.csv");
    csv << "variant,rho,reached,rounds_to_target,uplink_bytes\n";
    for (const auto& r : rows)
      csv << r.name << "," << r.rho << "," << (r.reached ? 1 : 0) << ","
          << r.rounds_to_target << "," << r.uplink_bytes << "\n";
  } else if (cfg.mode == "eval") {
    auto params = read_checkpoint(*cfg.checkpoint);
    auto data = prepare_data(cfg);
    auto detection = detect(params, cfg, data.partitions);
    write_text(out / "eval.json",
               eval_to_json(detection.eval, detection.model).dump(2) + "\n");
    write_scores(out / "scores.csv", detection.scores);
  } else {
    throw ConfigError("unknown mode " + cfg.mode);
  }
  return 0;
}

}  // namespace fedad
