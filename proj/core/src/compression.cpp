#include "fedad/compression.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace fedad {

std::size_t CompressorConfig::keep_count(std::size_t L, double rho) {
  const auto k = static_cast<std::size_t>(
      std::floor(static_cast<double>(L) * rho / 100.0));
  return std::clamp<std::size_t>(k, 1, L);
}

std::vector<double> clip(std::span<const double> grad, double clip_norm) {
  double sumsq = 0.0;
  for (double g : grad) {
    if (!std::isfinite(g))
      throw NonFiniteGradientError("gradient contains a non-finite value");
    sumsq += g * g;
  }
  std::vector<double> out(grad.begin(), grad.end());
  const double norm = std::sqrt(sumsq);
  if (norm > clip_norm) {
    const double s = clip_norm / norm;
    for (auto& g : out) g *= s;
  }
  return out;
}

void accumulate(CompressorState& state, std::span<const double> grad, double m) {
  if (grad.size() != state.size())
    throw LengthMismatchError("gradient length does not match compressor state");
  for (std::size_t j = 0; j < grad.size(); ++j) {
    state.u[j] = m * state.u[j] + grad[j];
    state.v[j] += state.u[j];
  }
}

TopkResult topk_select(std::span<const double> v, double rho) {
  if (v.empty()) throw LengthMismatchError("topk_select on an empty vector");
  const std::size_t L = v.size();
  const std::size_t k = CompressorConfig::keep_count(L, rho);
  std::vector<std::uint32_t> order(L);
  std::iota(order.begin(), order.end(), 0u);
  // sort by |v| descending, index ascending on ties
  std::nth_element(order.begin(), order.begin() + (k - 1), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ma = std::abs(v[a]), mb = std::abs(v[b]);
                     return ma != mb ? ma > mb : a < b;
                   });
  TopkResult res;
  res.threshold = std::abs(v[order[k - 1]]);
  res.indices.assign(order.begin(), order.begin() + k);
  std::sort(res.indices.begin(), res.indices.end());
  return res;
}

SparseUpdate compress(CompressorState& state, std::uint32_t round,
                      std::uint32_t node_id, const CompressorConfig& cfg) {
  const std::size_t L = state.size();
  SparseUpdate up;
  up.round = round;
  up.node_id = node_id;
  up.dense_len = static_cast<std::uint32_t>(L);
  const bool dense =
      cfg.rho >= 100.0 || round < static_cast<std::uint32_t>(cfg.warmup_rounds);
  if (dense) {
    up.indices.resize(L);
    std::iota(up.indices.begin(), up.indices.end(), 0u);
  } else {
    up.indices = topk_select(state.v, cfg.rho).indices;
  }
  up.values.reserve(up.indices.size());
  for (auto idx : up.indices) {
    up.values.push_back(state.v[idx]);
    state.v[idx] = 0.0;
  }
  return up;
}

std::vector<double> decode(const SparseUpdate& update) {
  std::vector<double> out(update.dense_len, 0.0);
  if (update.indices.size() != update.values.size())
    throw CorruptUpdateError("index/value length mismatch");
  std::uint32_t prev = 0;
  bool first = true;
  for (std::size_t i = 0; i < update.indices.size(); ++i) {
    const auto idx = update.indices[i];
    if (idx >= update.dense_len)
      throw CorruptUpdateError("index " + std::to_string(idx) +
                               " out of range for dense length " +
                               std::to_string(update.dense_len));
    if (!first && idx <= prev)
      throw CorruptUpdateError("indices not strictly increasing");
    prev = idx;
    first = false;
    out[idx] = update.values[i];
  }
  return out;
}

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& buf, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  buf.insert(buf.end(), raw, raw + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> bytes, std::size_t& off) {
  if (off + sizeof(T) > bytes.size())
    throw CorruptUpdateError("truncated wire message");
  T value;
  std::memcpy(&value, bytes.data() + off, sizeof(T));
  off += sizeof(T);
  return value;
}

}  // namespace

std::vector<std::uint8_t> encode_update(const SparseUpdate& update) {
  std::vector<std::uint8_t> buf;
  buf.reserve(update.encoded_bytes());
  put<std::uint32_t>(buf, update.round);
  put<std::uint32_t>(buf, update.node_id);
  put<std::uint32_t>(buf, update.dense_len);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(update.indices.size()));
  for (auto idx : update.indices) put<std::uint32_t>(buf, idx);
  for (auto v : update.values) put<double>(buf, v);
  return buf;
}

SparseUpdate decode_wire(std::span<const std::uint8_t> bytes) {
  std::size_t off = 0;
  SparseUpdate up;
  up.round = get<std::uint32_t>(bytes, off);
  up.node_id = get<std::uint32_t>(bytes, off);
  up.dense_len = get<std::uint32_t>(bytes, off);
  const auto count = get<std::uint32_t>(bytes, off);
  up.indices.resize(count);
  for (auto& idx : up.indices) idx = get<std::uint32_t>(bytes, off);
  up.values.resize(count);
  for (auto& v : up.values) v = get<double>(bytes, off);
  if (off != bytes.size()) throw CorruptUpdateError("trailing bytes in message");
  return up;
}

}  // namespace fedad
