#include "fedad/federation.hpp"

#include <chrono>
#include <numeric>

namespace fedad {

std::mt19937_64 node_rng(std::uint64_t seed, int node_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(node_id) + 0x9e3779b9u};
  return std::mt19937_64(seq);
}

std::uint64_t ByteLedger::total_uplink() const {
  return std::accumulate(uplink.begin(), uplink.end(), std::uint64_t{0});
}

std::uint64_t ByteLedger::total_downlink() const {
  return std::accumulate(downlink.begin(), downlink.end(), std::uint64_t{0});
}

std::uint64_t broadcast_bytes(std::size_t param_count) {
  return 16 + static_cast<std::uint64_t>(param_count) * 8;
}

LocalTrainResult local_train(EdgeNode& node, const ParameterSet& global,
                             const ArchConfig& arch,
                             const FederationConfig& cfg) {
  const auto& train = node.partition.train;
  if (train.empty())
    throw EmptyPartitionError("node " + std::to_string(node.node_id) +
                              " has no training windows");
  node.params = global;
  const std::size_t L = node.params.flat_size();

  std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
  const int batch =
      std::min<int>(cfg.local_batch, static_cast<int>(train.size()));

  std::vector<double> grad(L, 0.0);
  double loss_sum = 0.0;
  std::size_t samples = 0;
  for (int step = 0; step < cfg.local_steps; ++step) {
    std::vector<double> step_grad(L, 0.0);
    for (int b = 0; b < batch; ++b) {
      const WindowPair& w = train[pick(node.rng)];
      Mat history(w.T, w.dims);
      history.d = w.history;
      Mat target(w.T, w.dims);
      target.d = w.horizon;
      auto fwd = forward(history, node.params, arch);
      auto bwd = backward(fwd.tape, target, node.params, arch, cfg.lambda);
      for (std::size_t j = 0; j < L; ++j) step_grad[j] += bwd.grad[j];
      loss_sum += bwd.loss;
      ++samples;
    }
    const double inv_b = 1.0 / batch;
    for (std::size_t j = 0; j < L; ++j) grad[j] += step_grad[j] * inv_b;
  }
  const double inv_steps = 1.0 / cfg.local_steps;
  for (auto& g : grad) g *= inv_steps;

  LocalTrainResult res;
  res.gradient = std::move(grad);
  res.mean_loss = loss_sum / static_cast<double>(samples);
  return res;
}

ParameterSet aggregate(const std::vector<SparseUpdate>& updates,
                       const ParameterSet& global, double eta) {
  if (updates.empty())
    throw MixedRoundsError("aggregate called with no updates");
  const std::size_t L = global.flat_size();
  const auto round = updates.front().round;
  for (const auto& up : updates) {
    if (up.dense_len != L)
      throw LengthMismatchError("update dense length does not match model");
    if (up.round != round)
      throw MixedRoundsError("updates from different rounds");
  }
  std::vector<double> g(L, 0.0);
  for (const auto& up : updates) {
    auto dense = decode(up);
    for (std::size_t j = 0; j < L; ++j) g[j] += dense[j];
  }
  const double inv_n = 1.0 / static_cast<double>(updates.size());
  auto flat = global.flatten();
  for (std::size_t j = 0; j < L; ++j) flat[j] -= eta * (g[j] * inv_n);
  ParameterSet out = global;
  out.unflatten(flat);
  return out;
}

RoundReport run_round(std::vector<EdgeNode>& nodes, Aggregator& agg,
                      const ArchConfig& arch, const FederationConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t L = agg.global.flat_size();

  std::vector<SparseUpdate> updates;
  updates.reserve(nodes.size());
  double loss_sum = 0.0;
  std::uint64_t uplink = 0;
  for (auto& node : nodes) {
    auto local = local_train(node, agg.global, arch, cfg);
    std::vector<double> grad = std::move(local.gradient);
    if (cfg.compressor.clip_norm)
      grad = clip(grad, *cfg.compressor.clip_norm);
    accumulate(node.compressor_state, grad, cfg.compressor.momentum);
    auto up = compress(node.compressor_state, agg.round,
                       static_cast<std::uint32_t>(node.node_id), cfg.compressor);
    uplink += encode_update(up).size();
    updates.push_back(std::move(up));
    loss_sum += local.mean_loss;
  }

  agg.global = aggregate(updates, agg.global, cfg.eta);
  if (agg.capture_updates)
    agg.captured.insert(agg.captured.end(), updates.begin(), updates.end());
  const std::uint64_t downlink = nodes.size() * broadcast_bytes(L);
  for (auto& node : nodes) node.params = agg.global;  // broadcast

  agg.ledger.uplink.push_back(uplink);
  agg.ledger.downlink.push_back(downlink);

  RoundReport rep;
  rep.round = agg.round;
  rep.mean_loss = loss_sum / static_cast<double>(nodes.size());
  rep.uplink_bytes = uplink;
  rep.downlink_bytes = downlink;
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  ++agg.round;
  return rep;
}

TrainingResult run_training(const std::vector<NodePartition>& partitions,
                            const ArchConfig& arch, const FederationConfig& cfg,
                            bool capture_updates) {
  arch.validate();
  Aggregator agg;
  agg.capture_updates = capture_updates;
  agg.global = init_params(arch, cfg.seed);
  const std::size_t L = agg.global.flat_size();

  std::vector<EdgeNode> nodes;
  nodes.reserve(partitions.size());
  for (const auto& part : partitions) {
    EdgeNode node;
    node.node_id = part.node_id;
    node.partition = part;
    node.params = agg.global;
    node.compressor_state = CompressorState(L);
    node.rng = node_rng(cfg.seed, part.node_id);
    nodes.push_back(std::move(node));
  }

  TrainingResult res;
  res.reports.reserve(cfg.rounds);
  for (int r = 0; r < cfg.rounds; ++r)
    res.reports.push_back(run_round(nodes, agg, arch, cfg));
  res.params = std::move(agg.global);
  res.ledger = std::move(agg.ledger);
  res.captured = std::move(agg.captured);
  return res;
}

}  // namespace fedad
