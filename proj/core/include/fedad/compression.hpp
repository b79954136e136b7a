#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fedad/errors.hpp"

namespace fedad {

struct CompressorConfig {
  double rho = 0.3;  // percent of coordinates kept per round; 100 = dense
  double momentum = 0.9;
  std::optional<double> clip_norm = 1.0;
  int warmup_rounds = 0;

  // keep-count for a flat gradient of length L
  static std::size_t keep_count(std::size_t L, double rho);
};

// Per-node accumulators: u is the momentum velocity, v the residual that
// holds back untransmitted mass. Both start at zero.
struct CompressorState {
  std::vector<double> u;
  std::vector<double> v;

  explicit CompressorState(std::size_t L = 0) : u(L, 0.0), v(L, 0.0) {}
  std::size_t size() const { return u.size(); }
};

// Sparse slice of a flat gradient; indices strictly increasing.
struct SparseUpdate {
  std::uint32_t round = 0;
  std::uint32_t node_id = 0;
  std::uint32_t dense_len = 0;
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  std::size_t encoded_bytes() const { return 16 + indices.size() * 12; }
};

// L2-clips the gradient to clip_norm.
std::vector<double> clip(std::span<const double> grad, double clip_norm);

// u <- m*u + grad; v <- v + u.
void accumulate(CompressorState& state, std::span<const double> grad, double m);

struct TopkResult {
  std::vector<std::uint32_t> indices;  // ascending
  double threshold = 0.0;              // k-th largest |v_i|
};

// Indices of the k = max(1, floor(L*rho/100)) largest-magnitude entries;
// ties broken toward lower indices.
TopkResult topk_select(std::span<const double> v, double rho);

// Emits the selected residual coordinates as a SparseUpdate and zeroes them
// in v. The velocity u is kept so that delayed flushes reproduce
// momentum-SGD's closed form (dense rho=100 runs match momentum-SGD
// exactly). During warmup rounds the update is dense.
SparseUpdate compress(CompressorState& state, std::uint32_t round,
                      std::uint32_t node_id, const CompressorConfig& cfg);

// Dense vector with zeros everywhere except the listed indices.
std::vector<double> decode(const SparseUpdate& update);

// Little-endian wire encoding:
//   u32 round, u32 node_id, u32 dense_len, u32 count,
//   count x u32 indices, count x f64 values.
std::vector<std::uint8_t> encode_update(const SparseUpdate& update);
SparseUpdate decode_wire(std::span<const std::uint8_t> bytes);

}  // namespace fedad
