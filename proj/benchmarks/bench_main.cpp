#include <benchmark/benchmark.h>

#include <random>

#include "fedad/compression.hpp"
#include "fedad/federation.hpp"
#include "fedad/model.hpp"
#include "fedad/synthetic.hpp"

using namespace fedad;

namespace {

ArchConfig default_arch() {
  ArchConfig cfg;
  cfg.dims = 1;
  cfg.window = 20;
  cfg.cnn = {{3, 16, 2}, {3, 32, 2}};
  cfg.attention = true;
  cfg.attention_stages = {{3, 8, 1}};
  cfg.lstm_hidden = 32;
  return cfg;
}

Mat random_history(const ArchConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  Mat m(cfg.window, cfg.dims);
  for (auto& v : m.d) v = dist(rng);
  return m;
}

std::vector<double> random_residual(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

}  // namespace

static void BM_Forward(benchmark::State& state) {
  auto cfg = default_arch();
  auto params = init_params(cfg, 1);
  auto history = random_history(cfg, 2);
  for (auto _ : state)
    benchmark::DoNotOptimize(forward(history, params, cfg).prediction.d[0]);
}
BENCHMARK(BM_Forward);

static void BM_ForwardBackward(benchmark::State& state) {
  auto cfg = default_arch();
  auto params = init_params(cfg, 1);
  auto history = random_history(cfg, 2);
  auto target = random_history(cfg, 3);
  for (auto _ : state) {
    auto fwd = forward(history, params, cfg);
    auto bwd = backward(fwd.tape, target, params, cfg, 0.0);
    benchmark::DoNotOptimize(bwd.grad[0]);
  }
}
BENCHMARK(BM_ForwardBackward);

static void BM_TopkSelect(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto v = random_residual(n, 5);
  const std::size_t k = std::max<std::size_t>(1, n * 3 / 1000);
  for (auto _ : state) {
    auto res = topk_select(v, k);
    benchmark::DoNotOptimize(res.indices[0]);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_TopkSelect)->Arg(1 << 14)->Arg(1 << 17)->Arg(1 << 20);

static void BM_CompressEncode(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  CompressorConfig cc;
  cc.rho = 0.3;
  auto base = random_residual(n, 7);
  for (auto _ : state) {
    CompressorState cs(n);
    cs.v = base;
    auto up = compress(cs, 0, 0, cc);
    benchmark::DoNotOptimize(encode_update(up).size());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_CompressEncode)->Arg(1 << 17)->Arg(1 << 20);

static void BM_FederatedRound(benchmark::State& state) {
  auto arch = default_arch();
  SyntheticConfig sc;
  sc.points = 1000;
  sc.anomaly_frac = 0.0;
  sc.seed = 9;
  auto series = make_synthetic(sc);
  auto windows = make_windows(normalize(series, fit_normalizer(series)),
                              arch.window);
  auto parts = partition(windows, 4, 0.6, 0.1, 9);

  FederationConfig cfg;
  cfg.nodes = 4;
  cfg.rounds = 1;
  cfg.eta = 0.05;
  cfg.local_batch = 16;
  cfg.compressor.rho = 0.3;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        run_training(parts, arch, cfg).params.flat_size());
}
BENCHMARK(BM_FederatedRound);

BENCHMARK_MAIN();
