#include <doctest.h>

#include <cmath>
#include <random>

#include "fedad/federation.hpp"
#include "fedad/synthetic.hpp"
#include "test_util.hpp"

using namespace fedad;

namespace {

std::vector<NodePartition> sine_partitions(const ArchConfig& arch, int nodes,
                                           int points = 160,
                                           std::uint64_t seed = 5) {
  SyntheticConfig sc;
  sc.points = points;
  sc.dims = arch.dims;
  sc.anomaly_frac = 0.0;
  sc.seed = seed;
  auto series = make_synthetic(sc);
  auto norm = fit_normalizer(series);
  auto windows = make_windows(normalize(series, norm), arch.window);
  return partition(windows, nodes, 0.6, 0.1, seed);
}

ArchConfig tiny_arch() {
  std::mt19937_64 rng(41);
  auto cfg = testutil::random_tiny_config(rng);
  cfg.window = 4;
  cfg.dims = 1;
  return cfg;
}

}  // namespace

TEST_CASE("node_rng: deterministic and node-distinct") {
  auto a = node_rng(123, 0);
  auto b = node_rng(123, 0);
  auto c = node_rng(123, 1);
  CHECK(a() == b());
  CHECK(a() != c());  // overwhelmingly likely for distinct streams
  auto d = node_rng(124, 0);
  CHECK(node_rng(123, 0)() != d());
}

TEST_CASE("local_train: deterministic for a fixed rng state") {
  auto arch = tiny_arch();
  auto parts = sine_partitions(arch, 1);
  auto global = init_params(arch, 9);

  FederationConfig cfg;
  cfg.seed = 9;
  cfg.local_batch = 4;
  cfg.local_steps = 2;

  EdgeNode n1{0, parts[0], global, CompressorState(global.flat_size()),
              node_rng(cfg.seed, 0)};
  EdgeNode n2 = n1;
  n2.rng = node_rng(cfg.seed, 0);
  auto r1 = local_train(n1, global, arch, cfg);
  auto r2 = local_train(n2, global, arch, cfg);
  CHECK(r1.gradient == r2.gradient);
  CHECK(r1.mean_loss == r2.mean_loss);
}

TEST_CASE("local_train: single window matches a direct backward pass") {
  auto arch = tiny_arch();
  auto parts = sine_partitions(arch, 1);
  auto global = init_params(arch, 2);

  NodePartition solo = parts[0];
  solo.train.resize(1);
  FederationConfig cfg;
  cfg.local_batch = 3;  // all draws hit the only window
  cfg.lambda = 0.01;

  EdgeNode node{0, solo, global, CompressorState(global.flat_size()),
                node_rng(0, 0)};
  auto res = local_train(node, global, arch, cfg);

  const WindowPair& w = solo.train[0];
  Mat hist(w.T, w.dims), target(w.T, w.dims);
  hist.d = w.history;
  target.d = w.horizon;
  auto fwd = forward(hist, global, arch);
  auto bwd = backward(fwd.tape, target, global, arch, cfg.lambda);
  REQUIRE(res.gradient.size() == bwd.grad.size());
  for (std::size_t j = 0; j < bwd.grad.size(); ++j)
    CHECK(res.gradient[j] == doctest::Approx(bwd.grad[j]).epsilon(1e-12));
  CHECK(res.mean_loss == doctest::Approx(bwd.loss).epsilon(1e-12));
}

TEST_CASE("local_train: empty partition is an error") {
  auto arch = tiny_arch();
  auto global = init_params(arch, 1);
  EdgeNode node;
  node.params = global;
  FederationConfig cfg;
  CHECK_THROWS_AS(local_train(node, global, arch, cfg), EmptyPartitionError);
}

TEST_CASE("aggregate: mean of identical dense updates") {
  ParameterSet global;
  global.tensors.push_back({"w", Tensor{{3}, {1.0, 2.0, 3.0}}});
  SparseUpdate up;
  up.round = 0;
  up.dense_len = 3;
  up.indices = {0, 1, 2};
  up.values = {0.5, -1.0, 2.0};
  auto out = aggregate({up, up}, global, 0.1);
  auto flat = out.flatten();
  CHECK(flat[0] == doctest::Approx(1.0 - 0.1 * 0.5).epsilon(1e-15));
  CHECK(flat[1] == doctest::Approx(2.0 + 0.1).epsilon(1e-15));
  CHECK(flat[2] == doctest::Approx(3.0 - 0.2).epsilon(1e-15));
}

TEST_CASE("aggregate: disjoint sparse supports average against zeros") {
  ParameterSet global;
  global.tensors.push_back({"w", Tensor{{4}, {0.0, 0.0, 0.0, 0.0}}});
  SparseUpdate a, b;
  a.round = b.round = 7;
  a.dense_len = b.dense_len = 4;
  a.node_id = 0;
  b.node_id = 1;
  a.indices = {0};
  a.values = {2.0};
  b.indices = {3};
  b.values = {-4.0};
  auto out = aggregate({a, b}, global, 1.0);
  auto flat = out.flatten();
  CHECK(flat == std::vector<double>{-1.0, 0.0, 0.0, 2.0});
}

TEST_CASE("aggregate: rejects empty, mixed rounds and bad lengths") {
  ParameterSet global;
  global.tensors.push_back({"w", Tensor{{2}, {0.0, 0.0}}});
  CHECK_THROWS_AS(aggregate({}, global, 0.1), MixedRoundsError);

  SparseUpdate a, b;
  a.dense_len = b.dense_len = 2;
  a.round = 0;
  b.round = 1;
  CHECK_THROWS_AS(aggregate({a, b}, global, 0.1), MixedRoundsError);

  b.round = 0;
  b.dense_len = 3;
  CHECK_THROWS_AS(aggregate({a, b}, global, 0.1), LengthMismatchError);
}

TEST_CASE("run_training: exact wire byte accounting at full density") {
  auto arch = tiny_arch();
  const int N = 3;
  auto parts = sine_partitions(arch, N);

  FederationConfig cfg;
  cfg.nodes = N;
  cfg.rounds = 2;
  cfg.local_batch = 4;
  cfg.eta = 0.01;
  cfg.compressor.rho = 100.0;
  auto res = run_training(parts, arch, cfg);

  const std::uint64_t L = res.params.flat_size();
  REQUIRE(res.ledger.uplink.size() == 2);
  for (auto bytes : res.ledger.uplink) CHECK(bytes == N * (16 + 12 * L));
  for (auto bytes : res.ledger.downlink) CHECK(bytes == N * (16 + 8 * L));
  CHECK(res.ledger.total_uplink() == 2 * N * (16 + 12 * L));
}

TEST_CASE("run_training: sparse rounds cost fewer uplink bytes") {
  auto arch = tiny_arch();
  auto parts = sine_partitions(arch, 2);

  FederationConfig dense_cfg;
  dense_cfg.nodes = 2;
  dense_cfg.rounds = 3;
  dense_cfg.local_batch = 4;
  dense_cfg.compressor.rho = 100.0;
  auto dense = run_training(parts, arch, dense_cfg);

  auto sparse_cfg = dense_cfg;
  sparse_cfg.compressor.rho = 10.0;
  auto sparse = run_training(parts, arch, sparse_cfg);
  CHECK(sparse.ledger.total_uplink() < dense.ledger.total_uplink());
  CHECK(sparse.ledger.total_downlink() == dense.ledger.total_downlink());
}

TEST_CASE("run_training: deterministic under a fixed seed") {
  auto arch = tiny_arch();
  auto parts = sine_partitions(arch, 2);
  FederationConfig cfg;
  cfg.nodes = 2;
  cfg.rounds = 4;
  cfg.local_batch = 4;
  cfg.seed = 77;
  cfg.compressor.rho = 30.0;
  auto a = run_training(parts, arch, cfg);
  auto b = run_training(parts, arch, cfg);
  CHECK(a.params.flatten() == b.params.flatten());
  for (std::size_t r = 0; r < a.reports.size(); ++r)
    CHECK(a.reports[r].mean_loss == b.reports[r].mean_loss);
}

TEST_CASE("run_training: captured updates re-encode to the ledger bytes") {
  auto arch = tiny_arch();
  auto parts = sine_partitions(arch, 2);
  FederationConfig cfg;
  cfg.nodes = 2;
  cfg.rounds = 3;
  cfg.local_batch = 4;
  cfg.compressor.rho = 25.0;
  auto res = run_training(parts, arch, cfg, true);

  REQUIRE(res.captured.size() == 2 * 3);
  std::vector<std::uint64_t> per_round(3, 0);
  for (const auto& up : res.captured)
    per_round[up.round] += encode_update(up).size();
  for (int r = 0; r < 3; ++r) CHECK(per_round[r] == res.ledger.uplink[r]);
}

TEST_CASE("single dense node reproduces standalone mini-batch SGD") {
  auto arch = tiny_arch();
  auto parts = sine_partitions(arch, 1);

  FederationConfig cfg;
  cfg.nodes = 1;
  cfg.rounds = 40;
  cfg.eta = 0.05;
  cfg.local_batch = 4;
  cfg.seed = 13;
  cfg.compressor.rho = 100.0;
  cfg.compressor.momentum = 0.0;
  cfg.compressor.clip_norm = std::nullopt;
  auto fed = run_training(parts, arch, cfg);

  // Standalone loop drawing the identical sample stream.
  auto params = init_params(arch, cfg.seed);
  const std::size_t L = params.flat_size();
  auto rng = node_rng(cfg.seed, parts[0].node_id);
  const auto& train = parts[0].train;
  std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
  const int batch = std::min<int>(cfg.local_batch, train.size());
  for (int r = 0; r < cfg.rounds; ++r) {
    std::vector<double> grad(L, 0.0);
    for (int b = 0; b < batch; ++b) {
      const WindowPair& w = train[pick(rng)];
      Mat hist(w.T, w.dims), target(w.T, w.dims);
      hist.d = w.history;
      target.d = w.horizon;
      auto fwd = forward(hist, params, arch);
      auto bwd = backward(fwd.tape, target, params, arch, 0.0);
      for (std::size_t j = 0; j < L; ++j) grad[j] += bwd.grad[j];
    }
    auto flat = params.flatten();
    for (std::size_t j = 0; j < L; ++j)
      flat[j] -= cfg.eta * (grad[j] / batch);
    params.unflatten(flat);
  }

  auto fed_flat = fed.params.flatten();
  auto ref_flat = params.flatten();
  REQUIRE(fed_flat.size() == ref_flat.size());
  for (std::size_t j = 0; j < L; ++j)
    CHECK(std::abs(fed_flat[j] - ref_flat[j]) < 1e-12);
}
