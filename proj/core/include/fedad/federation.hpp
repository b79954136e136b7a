#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "fedad/compression.hpp"
#include "fedad/model.hpp"
#include "fedad/timeseries.hpp"

namespace fedad {

struct FederationConfig {
  int nodes = 10;
  double eta = 0.001;
  int rounds = 100;       // E
  int local_batch = 128;  // B
  int local_steps = 1;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  CompressorConfig compressor;
};

// Seeded generator for one node's batch sampling; the centralized-SGD
// oracle in the tests reconstructs the identical stream.
std::mt19937_64 node_rng(std::uint64_t seed, int node_id);

struct EdgeNode {
  int node_id = 0;
  NodePartition partition;
  ParameterSet params;
  CompressorState compressor_state;
  std::mt19937_64 rng;
};

struct ByteLedger {
  std::vector<std::uint64_t> uplink;    // per round
  std::vector<std::uint64_t> downlink;  // per round
  std::uint64_t total_uplink() const;
  std::uint64_t total_downlink() const;
};

struct Aggregator {
  ParameterSet global;
  std::uint32_t round = 0;
  ByteLedger ledger;
  // When set, every received SparseUpdate is kept for later auditing.
  bool capture_updates = false;
  std::vector<SparseUpdate> captured;
};

struct RoundReport {
  std::uint32_t round = 0;
  double mean_loss = 0.0;
  std::uint64_t uplink_bytes = 0;
  std::uint64_t downlink_bytes = 0;
  double wall_seconds = 0.0;
};

struct LocalTrainResult {
  std::vector<double> gradient;  // mean over sampled windows, flat order
  double mean_loss = 0.0;
};

// Copies the global parameters into the node, runs local_steps seeded
// mini-batches (sampled with replacement from the node's train split), and
// returns the mean gradient and loss. Node parameters are not advanced.
LocalTrainResult local_train(EdgeNode& node, const ParameterSet& global,
                             const ArchConfig& arch,
                             const FederationConfig& cfg);

// FedAVG step on decoded sparse updates: params <- params - eta * mean(g).
ParameterSet aggregate(const std::vector<SparseUpdate>& updates,
                       const ParameterSet& global, double eta);

// One full round: local training, clip, accumulate, compress, aggregate,
// broadcast. The ledger records exact wire-encoded byte counts.
RoundReport run_round(std::vector<EdgeNode>& nodes, Aggregator& agg,
                      const ArchConfig& arch, const FederationConfig& cfg);

struct TrainingResult {
  ParameterSet params;
  std::vector<RoundReport> reports;
  ByteLedger ledger;
  std::vector<SparseUpdate> captured;  // filled when capture_updates is set
};

TrainingResult run_training(const std::vector<NodePartition>& partitions,
                            const ArchConfig& arch, const FederationConfig& cfg,
                            bool capture_updates = false);

// Dense parameter broadcast cost per node, in bytes (16-byte header plus
// 8 bytes per coordinate).
std::uint64_t broadcast_bytes(std::size_t param_count);

}  // namespace fedad
