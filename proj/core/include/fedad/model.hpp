#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedad/errors.hpp"

namespace fedad {

// Row-major matrix; rows index time, cols index channels.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> d;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), d(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return d[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return d[static_cast<std::size_t>(r) * cols + c];
  }
};

struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  std::size_t size() const { return data.size(); }
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// The model's weights as an ordered list of named tensors. The list order
// is the canonical flat ordering: flatten() concatenates each tensor's
// row-major data in list order.
struct ParameterSet {
  std::vector<NamedTensor> tensors;

  std::size_t flat_size() const;
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);
  Tensor& find(const std::string& name);
  const Tensor& find(const std::string& name) const;
};

struct ConvSpec {
  int kernel = 3;
  int channels = 16;
  int pool = 2;
};

struct ArchConfig {
  int dims = 1;
  int window = 20;  // T
  std::vector<ConvSpec> cnn = {{3, 16, 2}, {3, 32, 2}};
  bool attention = true;
  std::vector<ConvSpec> attention_stages = {{3, 8, 1}, {3, 8, 1}};
  int lstm_hidden = 32;

  // Throws ShapeMismatchError if the layer stack cannot be applied to a
  // window of this length.
  void validate() const;
  int feature_rows() const;      // n: time length of the fused sequence
  int feature_channels() const;  // m: channel count of the fused sequence
  int attention_rows() const;    // time length after the aggregation stages
};

// Parameters in canonical order for this architecture, uniform in
// [-1/sqrt(fan_in), +1/sqrt(fan_in)].
ParameterSet init_params(const ArchConfig& cfg, std::uint64_t seed);
// Same layout, all zeros.
ParameterSet zero_params(const ArchConfig& cfg);

// Valid (no padding) cross-correlation plus bias.
// input: n x c_in; kernel shape [k, c_in, c_out]; bias length c_out.
Mat conv1d_forward(const Mat& input, const Tensor& kernel,
                   const std::vector<double>& bias);

// e_i = u^T W v_i, alpha_i = e_i / sum(e_i), context = sum(alpha_i v_i).
// When |sum(e_i)| is below 1e-12 the normalization is undefined; alphas
// fall back to uniform and `degenerate` is set.
struct AttentionResult {
  std::vector<double> alphas;
  std::vector<double> context;
  bool degenerate = false;
};
AttentionResult attention_scores(const std::vector<double>& u,
                                 const std::vector<std::vector<double>>& V,
                                 const Mat& W);

// Elementwise product of the CNN features and the attention gate.
Mat fuse(const Mat& w_cnn, const Mat& w_att);

struct LstmState {
  std::vector<double> h;
  std::vector<double> c;
};

// One step of the standard LSTM cell. Weight matrices have shape
// [hidden, hidden + input] and act on the concatenation [h_prev, x].
LstmState lstm_cell(const std::vector<double>& x, const LstmState& prev,
                    const Tensor& W_f, const Tensor& W_i, const Tensor& W_C,
                    const Tensor& W_o, const std::vector<double>& b_f,
                    const std::vector<double>& b_i,
                    const std::vector<double>& b_C,
                    const std::vector<double>& b_o);

struct ConvLayerTape {
  Mat input;
  Mat pre;      // conv output before the nonlinearity
  Mat pooled;   // after relu + max-pool
  std::vector<int> argmax;  // source row per pooled cell
};

struct LstmStepTape {
  std::vector<double> x, f, i, o, g, c, h, tanh_c;
};

struct ForwardTape {
  int T = 0;
  int dims = 0;
  std::vector<ConvLayerTape> cnn;
  Mat features;  // main-branch output, n x m
  std::vector<ConvLayerTape> att;
  Mat att_proj;                  // 1x1 conv output before upsampling
  std::vector<int> upsample_src;  // source row per fused-sequence row
  Mat gate;                      // sigmoid gate, n x m
  Mat fused;
  std::vector<LstmStepTape> lstm;
  std::vector<double> prediction;  // T*d, row-major
};

struct ForwardResult {
  Mat prediction;  // T x d
  ForwardTape tape;
};

// Full pipeline: CNN stack -> attention gate -> fuse -> LSTM -> linear
// projection of the final hidden state to the T x d horizon.
ForwardResult forward(const Mat& history, const ParameterSet& params,
                      const ArchConfig& cfg);

// Gate matrix for a precomputed feature sequence (the attention branch in
// isolation). features: n x m, output: n x m in (0,1).
Mat attention_branch(const Mat& features, const ParameterSet& params,
                     const ArchConfig& cfg);

struct BackwardResult {
  double loss = 0.0;
  std::vector<double> grad;  // canonical flat order, length L
};

// MSE between the taped prediction and `target`, plus lambda*||w||^2, with
// the exact analytic gradient in canonical flat order.
BackwardResult backward(const ForwardTape& tape, const Mat& target,
                        const ParameterSet& params, const ArchConfig& cfg,
                        double lambda = 0.0);

}  // namespace fedad
