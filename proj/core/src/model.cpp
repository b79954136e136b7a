#include "fedad/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fedad {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct LstmSlices {
  const Tensor *W_f, *W_i, *W_C, *W_o;
  const std::vector<double> *b_f, *b_i, *b_C, *b_o;
};

LstmSlices lstm_slices(const ParameterSet& p) {
  return {&p.find("lstm.W_f"), &p.find("lstm.W_i"), &p.find("lstm.W_C"),
          &p.find("lstm.W_o"), &p.find("lstm.b_f").data,
          &p.find("lstm.b_i").data, &p.find("lstm.b_C").data,
          &p.find("lstm.b_o").data};
}

// z = W * concat + b, for one gate. W shape [hidden, hidden + input].
std::vector<double> gate_preact(const Tensor& W, const std::vector<double>& b,
                                const std::vector<double>& concat) {
  const int H = W.shape[0];
  const int C = W.shape[1];
  if (static_cast<int>(concat.size()) != C || static_cast<int>(b.size()) != H)
    throw ShapeMismatchError("lstm gate weight shape does not match input");
  std::vector<double> z(H);
  for (int j = 0; j < H; ++j) {
    double acc = b[j];
    const double* row = W.data.data() + static_cast<std::size_t>(j) * C;
    for (int c = 0; c < C; ++c) acc += row[c] * concat[c];
    z[j] = acc;
  }
  return z;
}

LstmStepTape lstm_step(const std::vector<double>& x,
                       const std::vector<double>& h_prev,
                       const std::vector<double>& c_prev,
                       const LstmSlices& s) {
  std::vector<double> concat;
  concat.reserve(h_prev.size() + x.size());
  concat.insert(concat.end(), h_prev.begin(), h_prev.end());
  concat.insert(concat.end(), x.begin(), x.end());
  LstmStepTape t;
  t.x = x;
  const int H = s.W_f->shape[0];
  auto zf = gate_preact(*s.W_f, *s.b_f, concat);
  auto zi = gate_preact(*s.W_i, *s.b_i, concat);
  auto zg = gate_preact(*s.W_C, *s.b_C, concat);
  auto zo = gate_preact(*s.W_o, *s.b_o, concat);
  t.f.resize(H); t.i.resize(H); t.g.resize(H); t.o.resize(H);
  t.c.resize(H); t.h.resize(H); t.tanh_c.resize(H);
  for (int j = 0; j < H; ++j) {
    t.f[j] = sigmoid(zf[j]);
    t.i[j] = sigmoid(zi[j]);
    t.g[j] = std::tanh(zg[j]);
    t.o[j] = sigmoid(zo[j]);
    t.c[j] = t.f[j] * c_prev[j] + t.i[j] * t.g[j];
    t.tanh_c[j] = std::tanh(t.c[j]);
    t.h[j] = t.o[j] * t.tanh_c[j];
  }
  return t;
}

// relu + non-overlapping max-pool of width `pool`; records the source row
// of each pooled cell.
void relu_pool(const Mat& pre, int pool, Mat& pooled, std::vector<int>& argmax) {
  const int out_rows = pre.rows / pool;
  pooled = Mat(out_rows, pre.cols);
  argmax.assign(static_cast<std::size_t>(out_rows) * pre.cols, 0);
  for (int r = 0; r < out_rows; ++r)
    for (int ch = 0; ch < pre.cols; ++ch) {
      double best = -1.0;
      int best_row = r * pool;
      for (int q = 0; q < pool; ++q) {
        const double v = std::max(0.0, pre.at(r * pool + q, ch));
        if (v > best) {
          best = v;
          best_row = r * pool + q;
        }
      }
      pooled.at(r, ch) = best;
      argmax[static_cast<std::size_t>(r) * pre.cols + ch] = best_row;
    }
}

void conv1d_backward(const Mat& input, const Tensor& kernel, const Mat& dout,
                     Tensor& dkernel, Tensor& dbias, Mat* dinput) {
  const int k = kernel.shape[0];
  const int c_in = kernel.shape[1];
  const int c_out = kernel.shape[2];
  for (int t = 0; t < dout.rows; ++t)
    for (int co = 0; co < c_out; ++co) {
      const double g = dout.at(t, co);
      if (g == 0.0) continue;
      dbias.data[co] += g;
      for (int dt = 0; dt < k; ++dt)
        for (int ci = 0; ci < c_in; ++ci) {
          const std::size_t kidx =
              (static_cast<std::size_t>(dt) * c_in + ci) * c_out + co;
          dkernel.data[kidx] += input.at(t + dt, ci) * g;
          if (dinput) dinput->at(t + dt, ci) += kernel.data[kidx] * g;
        }
    }
}

// dpooled -> dpre through the pool argmax and the relu mask.
Mat relu_pool_backward(const ConvLayerTape& lt, const Mat& dpooled) {
  Mat dpre(lt.pre.rows, lt.pre.cols);
  for (int r = 0; r < dpooled.rows; ++r)
    for (int ch = 0; ch < dpooled.cols; ++ch) {
      const int src = lt.argmax[static_cast<std::size_t>(r) * dpooled.cols + ch];
      if (lt.pre.at(src, ch) > 0.0) dpre.at(src, ch) += dpooled.at(r, ch);
    }
  return dpre;
}

Tensor make_tensor(std::vector<int> shape) {
  Tensor t;
  t.shape = std::move(shape);
  std::size_t n = 1;
  for (int s : t.shape) n *= static_cast<std::size_t>(s);
  t.data.assign(n, 0.0);
  return t;
}

}  // namespace

// ---------------------------------------------------------------- ParameterSet

std::size_t ParameterSet::flat_size() const {
  std::size_t n = 0;
  for (const auto& nt : tensors) n += nt.tensor.size();
  return n;
}

std::vector<double> ParameterSet::flatten() const {
  std::vector<double> out;
  out.reserve(flat_size());
  for (const auto& nt : tensors)
    out.insert(out.end(), nt.tensor.data.begin(), nt.tensor.data.end());
  return out;
}

void ParameterSet::unflatten(std::span<const double> flat) {
  if (flat.size() != flat_size())
    throw LengthMismatchError("flat vector length " +
                              std::to_string(flat.size()) +
                              " does not match parameter count " +
                              std::to_string(flat_size()));
  std::size_t off = 0;
  for (auto& nt : tensors) {
    std::copy_n(flat.begin() + off, nt.tensor.size(), nt.tensor.data.begin());
    off += nt.tensor.size();
  }
}

Tensor& ParameterSet::find(const std::string& name) {
  for (auto& nt : tensors)
    if (nt.name == name) return nt.tensor;
  throw ShapeMismatchError("no parameter tensor named " + name);
}

const Tensor& ParameterSet::find(const std::string& name) const {
  for (const auto& nt : tensors)
    if (nt.name == name) return nt.tensor;
  throw ShapeMismatchError("no parameter tensor named " + name);
}

// ------------------------------------------------------------------ ArchConfig

void ArchConfig::validate() const {
  if (dims < 1 || window < 1 || lstm_hidden < 1)
    throw ShapeMismatchError("dims, window and lstm_hidden must be >= 1");
  if (cnn.empty()) throw ShapeMismatchError("need at least one CNN layer");
  int n = window;
  for (const auto& l : cnn) {
    if (l.kernel < 1 || l.kernel % 2 == 0)
      throw ShapeMismatchError("kernel sizes must be odd and >= 1");
    if (l.pool < 1 || l.channels < 1)
      throw ShapeMismatchError("pool widths and channel counts must be >= 1");
    if (l.kernel > n)
      throw ShapeMismatchError("kernel longer than remaining sequence");
    n = (n - l.kernel + 1) / l.pool;
    if (n < 1) throw ShapeMismatchError("CNN stack consumes the whole window");
  }
  if (attention) {
    int a = n;
    for (const auto& l : attention_stages) {
      if (l.kernel < 1 || l.kernel % 2 == 0)
        throw ShapeMismatchError("kernel sizes must be odd and >= 1");
      if (l.pool < 1 || l.channels < 1)
        throw ShapeMismatchError("pool widths and channel counts must be >= 1");
      if (l.kernel > a)
        throw ShapeMismatchError("attention kernel longer than its input");
      a = (a - l.kernel + 1) / l.pool;
      if (a < 1)
        throw ShapeMismatchError("attention stack consumes the feature sequence");
    }
  }
}

int ArchConfig::feature_rows() const {
  int n = window;
  for (const auto& l : cnn) n = (n - l.kernel + 1) / l.pool;
  return n;
}

int ArchConfig::feature_channels() const { return cnn.back().channels; }

int ArchConfig::attention_rows() const {
  int a = feature_rows();
  for (const auto& l : attention_stages) a = (a - l.kernel + 1) / l.pool;
  return a;
}

ParameterSet zero_params(const ArchConfig& cfg) {
  cfg.validate();
  ParameterSet p;
  int c_in = cfg.dims;
  for (std::size_t i = 0; i < cfg.cnn.size(); ++i) {
    const auto& l = cfg.cnn[i];
    p.tensors.push_back({"cnn" + std::to_string(i) + ".kernel",
                         make_tensor({l.kernel, c_in, l.channels})});
    p.tensors.push_back(
        {"cnn" + std::to_string(i) + ".bias", make_tensor({l.channels})});
    c_in = l.channels;
  }
  const int m = cfg.feature_channels();
  if (cfg.attention) {
    int a_in = m;
    for (std::size_t i = 0; i < cfg.attention_stages.size(); ++i) {
      const auto& l = cfg.attention_stages[i];
      p.tensors.push_back({"att" + std::to_string(i) + ".kernel",
                           make_tensor({l.kernel, a_in, l.channels})});
      p.tensors.push_back(
          {"att" + std::to_string(i) + ".bias", make_tensor({l.channels})});
      a_in = l.channels;
    }
    p.tensors.push_back({"att_proj.kernel", make_tensor({1, a_in, m})});
    p.tensors.push_back({"att_proj.bias", make_tensor({m})});
  }
  const int H = cfg.lstm_hidden;
  for (const char* g : {"f", "i", "C", "o"})
    p.tensors.push_back({std::string("lstm.W_") + g, make_tensor({H, H + m})});
  for (const char* g : {"f", "i", "C", "o"})
    p.tensors.push_back({std::string("lstm.b_") + g, make_tensor({H})});
  const int out = cfg.window * cfg.dims;
  p.tensors.push_back({"out.weight", make_tensor({out, H})});
  p.tensors.push_back({"out.bias", make_tensor({out})});
  return p;
}

ParameterSet init_params(const ArchConfig& cfg, std::uint64_t seed) {
  ParameterSet p = zero_params(cfg);
  std::mt19937_64 rng(seed);
  for (auto& nt : p.tensors) {
    // fan_in: product of all but the last shape dimension for kernels and
    // weight matrices; biases keep the owning layer's scale via shape[0].
    double fan_in = 1.0;
    if (nt.tensor.shape.size() >= 2) {
      for (std::size_t i = 0; i + 1 < nt.tensor.shape.size(); ++i)
        fan_in *= nt.tensor.shape[i];
      if (nt.name.starts_with("lstm.W") || nt.name == "out.weight")
        fan_in = nt.tensor.shape[1];
    }
    const double bound = 1.0 / std::sqrt(std::max(1.0, fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : nt.tensor.data) v = dist(rng);
  }
  return p;
}

// ------------------------------------------------------------------ operations

Mat conv1d_forward(const Mat& input, const Tensor& kernel,
                   const std::vector<double>& bias) {
  if (kernel.shape.size() != 3)
    throw ShapeMismatchError("conv kernel must have shape [k, c_in, c_out]");
  const int k = kernel.shape[0];
  const int c_in = kernel.shape[1];
  const int c_out = kernel.shape[2];
  if (input.cols != c_in)
    throw ShapeMismatchError("conv input channels do not match kernel");
  if (k > input.rows)
    throw ShapeMismatchError("conv kernel longer than input sequence");
  if (static_cast<int>(bias.size()) != c_out)
    throw ShapeMismatchError("conv bias length does not match out channels");
  Mat out(input.rows - k + 1, c_out);
  for (int t = 0; t < out.rows; ++t)
    for (int co = 0; co < c_out; ++co) {
      double acc = bias[co];
      for (int dt = 0; dt < k; ++dt)
        for (int ci = 0; ci < c_in; ++ci)
          acc += input.at(t + dt, ci) *
                 kernel.data[(static_cast<std::size_t>(dt) * c_in + ci) * c_out +
                             co];
      out.at(t, co) = acc;
    }
  return out;
}

AttentionResult attention_scores(const std::vector<double>& u,
                                 const std::vector<std::vector<double>>& V,
                                 const Mat& W) {
  if (V.empty()) throw ShapeMismatchError("attention needs at least one v_i");
  if (W.rows != static_cast<int>(u.size()))
    throw ShapeMismatchError("W rows must match |u|");
  const int dv = W.cols;
  AttentionResult res;
  res.alphas.resize(V.size());
  double total = 0.0;
  for (std::size_t i = 0; i < V.size(); ++i) {
    if (static_cast<int>(V[i].size()) != dv)
      throw ShapeMismatchError("|v_i| must match W cols");
    double e = 0.0;
    for (int r = 0; r < W.rows; ++r)
      for (int c = 0; c < dv; ++c) e += u[r] * W.at(r, c) * V[i][c];
    res.alphas[i] = e;
    total += e;
  }
  if (!std::isfinite(total) || std::abs(total) <= 1e-12) {
    res.degenerate = true;
    std::fill(res.alphas.begin(), res.alphas.end(), 1.0 / V.size());
  } else {
    for (auto& a : res.alphas) a /= total;
  }
  res.context.assign(dv, 0.0);
  for (std::size_t i = 0; i < V.size(); ++i)
    for (int c = 0; c < dv; ++c) res.context[c] += res.alphas[i] * V[i][c];
  return res;
}

Mat fuse(const Mat& w_cnn, const Mat& w_att) {
  if (w_cnn.rows != w_att.rows || w_cnn.cols != w_att.cols)
    throw ShapeMismatchError("fuse operands must have identical shape");
  Mat out(w_cnn.rows, w_cnn.cols);
  for (std::size_t i = 0; i < out.d.size(); ++i) out.d[i] = w_cnn.d[i] * w_att.d[i];
  return out;
}

LstmState lstm_cell(const std::vector<double>& x, const LstmState& prev,
                    const Tensor& W_f, const Tensor& W_i, const Tensor& W_C,
                    const Tensor& W_o, const std::vector<double>& b_f,
                    const std::vector<double>& b_i,
                    const std::vector<double>& b_C,
                    const std::vector<double>& b_o) {
  LstmSlices s{&W_f, &W_i, &W_C, &W_o, &b_f, &b_i, &b_C, &b_o};
  if (prev.h.size() != prev.c.size())
    throw ShapeMismatchError("LstmState h and c must have the same length");
  auto t = lstm_step(x, prev.h, prev.c, s);
  return {t.h, t.c};
}

namespace {

// Shared by forward() and attention_branch(): runs the aggregation stages,
// the 1x1 projection, upsampling, and the sigmoid, recording tape entries.
void run_attention(const Mat& features, const ParameterSet& params,
                   const ArchConfig& cfg, ForwardTape& tape) {
  Mat a = features;
  for (std::size_t i = 0; i < cfg.attention_stages.size(); ++i) {
    ConvLayerTape lt;
    lt.input = a;
    lt.pre = conv1d_forward(a, params.find("att" + std::to_string(i) + ".kernel"),
                            params.find("att" + std::to_string(i) + ".bias").data);
    relu_pool(lt.pre, cfg.attention_stages[i].pool, lt.pooled, lt.argmax);
    a = lt.pooled;
    tape.att.push_back(std::move(lt));
  }
  tape.att_proj = conv1d_forward(a, params.find("att_proj.kernel"),
                                 params.find("att_proj.bias").data);
  const int n = features.rows;
  const int m = features.cols;
  tape.upsample_src.resize(n);
  tape.gate = Mat(n, m);
  for (int i = 0; i < n; ++i) {
    const int src = i * tape.att_proj.rows / n;
    tape.upsample_src[i] = src;
    for (int ch = 0; ch < m; ++ch)
      tape.gate.at(i, ch) = sigmoid(tape.att_proj.at(src, ch));
  }
}

}  // namespace

Mat attention_branch(const Mat& features, const ParameterSet& params,
                     const ArchConfig& cfg) {
  ForwardTape scratch;
  run_attention(features, params, cfg, scratch);
  return scratch.gate;
}

ForwardResult forward(const Mat& history, const ParameterSet& params,
                      const ArchConfig& cfg) {
  cfg.validate();
  if (history.rows != cfg.window || history.cols != cfg.dims)
    throw ShapeMismatchError("history window does not match architecture");

  ForwardTape tape;
  tape.T = cfg.window;
  tape.dims = cfg.dims;

  Mat x = history;
  for (std::size_t i = 0; i < cfg.cnn.size(); ++i) {
    ConvLayerTape lt;
    lt.input = x;
    lt.pre = conv1d_forward(x, params.find("cnn" + std::to_string(i) + ".kernel"),
                            params.find("cnn" + std::to_string(i) + ".bias").data);
    relu_pool(lt.pre, cfg.cnn[i].pool, lt.pooled, lt.argmax);
    x = lt.pooled;
    tape.cnn.push_back(std::move(lt));
  }
  tape.features = x;

  if (cfg.attention) {
    run_attention(tape.features, params, cfg, tape);
    tape.fused = fuse(tape.features, tape.gate);
  } else {
    tape.fused = tape.features;
  }

  const int H = cfg.lstm_hidden;
  auto slices = lstm_slices(params);
  std::vector<double> h(H, 0.0), c(H, 0.0);
  for (int t = 0; t < tape.fused.rows; ++t) {
    std::vector<double> xt(tape.fused.d.begin() +
                               static_cast<std::size_t>(t) * tape.fused.cols,
                           tape.fused.d.begin() +
                               static_cast<std::size_t>(t + 1) * tape.fused.cols);
    auto st = lstm_step(xt, h, c, slices);
    h = st.h;
    c = st.c;
    tape.lstm.push_back(std::move(st));
  }

  const Tensor& Wout = params.find("out.weight");
  const Tensor& bout = params.find("out.bias");
  const int out_len = cfg.window * cfg.dims;
  tape.prediction.resize(out_len);
  for (int r = 0; r < out_len; ++r) {
    double acc = bout.data[r];
    for (int cidx = 0; cidx < H; ++cidx)
      acc += Wout.data[static_cast<std::size_t>(r) * H + cidx] * h[cidx];
    tape.prediction[r] = acc;
  }

  ForwardResult res;
  res.prediction = Mat(cfg.window, cfg.dims);
  res.prediction.d = tape.prediction;
  res.tape = std::move(tape);
  return res;
}

BackwardResult backward(const ForwardTape& tape, const Mat& target,
                        const ParameterSet& params, const ArchConfig& cfg,
                        double lambda) {
  if (target.rows != tape.T || target.cols != tape.dims ||
      tape.prediction.size() != target.d.size())
    throw StaleTapeError("target shape does not match the taped forward pass");
  if (tape.lstm.empty() || tape.cnn.empty())
    throw StaleTapeError("tape is incomplete");

  // grad tensors mirror the parameter layout
  ParameterSet grads;
  grads.tensors.reserve(params.tensors.size());
  for (const auto& nt : params.tensors) {
    Tensor g;
    g.shape = nt.tensor.shape;
    g.data.assign(nt.tensor.data.size(), 0.0);
    grads.tensors.push_back({nt.name, std::move(g)});
  }

  const int out_len = tape.T * tape.dims;
  const int H = cfg.lstm_hidden;
  const int m = tape.fused.cols;
  const double scale = 2.0 / out_len;

  double loss = 0.0;
  std::vector<double> dpred(out_len);
  for (int r = 0; r < out_len; ++r) {
    const double diff = tape.prediction[r] - target.d[r];
    loss += diff * diff;
    dpred[r] = scale * diff;
  }
  loss /= out_len;

  const Tensor& Wout = params.find("out.weight");
  Tensor& dWout = grads.find("out.weight");
  Tensor& dbout = grads.find("out.bias");
  const auto& h_last = tape.lstm.back().h;
  std::vector<double> dh(H, 0.0), dc(H, 0.0);
  for (int r = 0; r < out_len; ++r) {
    dbout.data[r] += dpred[r];
    for (int cidx = 0; cidx < H; ++cidx) {
      dWout.data[static_cast<std::size_t>(r) * H + cidx] +=
          dpred[r] * h_last[cidx];
      dh[cidx] += Wout.data[static_cast<std::size_t>(r) * H + cidx] * dpred[r];
    }
  }

  const Tensor& Wf = params.find("lstm.W_f");
  const Tensor& Wi = params.find("lstm.W_i");
  const Tensor& Wc = params.find("lstm.W_C");
  const Tensor& Wo = params.find("lstm.W_o");
  Tensor& dWf = grads.find("lstm.W_f");
  Tensor& dWi = grads.find("lstm.W_i");
  Tensor& dWc = grads.find("lstm.W_C");
  Tensor& dWo = grads.find("lstm.W_o");
  Tensor& dbf = grads.find("lstm.b_f");
  Tensor& dbi = grads.find("lstm.b_i");
  Tensor& dbc = grads.find("lstm.b_C");
  Tensor& dbo = grads.find("lstm.b_o");

  Mat dfused(tape.fused.rows, tape.fused.cols);
  const int C = H + m;
  const std::vector<double> zeros_h(H, 0.0);

  for (int t = static_cast<int>(tape.lstm.size()) - 1; t >= 0; --t) {
    const auto& st = tape.lstm[t];
    const auto& h_prev = t > 0 ? tape.lstm[t - 1].h : zeros_h;
    const auto& c_prev = t > 0 ? tape.lstm[t - 1].c : zeros_h;

    std::vector<double> concat;
    concat.reserve(C);
    concat.insert(concat.end(), h_prev.begin(), h_prev.end());
    concat.insert(concat.end(), st.x.begin(), st.x.end());

    std::vector<double> dconcat(C, 0.0);
    std::vector<double> dh_prev(H, 0.0), dc_prev(H, 0.0);
    for (int j = 0; j < H; ++j) {
      const double d_o = dh[j] * st.tanh_c[j];
      const double dct = dc[j] + dh[j] * st.o[j] * (1.0 - st.tanh_c[j] * st.tanh_c[j]);
      const double d_f = dct * c_prev[j];
      const double d_i = dct * st.g[j];
      const double d_g = dct * st.i[j];
      dc_prev[j] = dct * st.f[j];

      const double dzf = d_f * st.f[j] * (1.0 - st.f[j]);
      const double dzi = d_i * st.i[j] * (1.0 - st.i[j]);
      const double dzg = d_g * (1.0 - st.g[j] * st.g[j]);
      const double dzo = d_o * st.o[j] * (1.0 - st.o[j]);

      dbf.data[j] += dzf;
      dbi.data[j] += dzi;
      dbc.data[j] += dzg;
      dbo.data[j] += dzo;
      const std::size_t row = static_cast<std::size_t>(j) * C;
      for (int cc = 0; cc < C; ++cc) {
        dWf.data[row + cc] += dzf * concat[cc];
        dWi.data[row + cc] += dzi * concat[cc];
        dWc.data[row + cc] += dzg * concat[cc];
        dWo.data[row + cc] += dzo * concat[cc];
        dconcat[cc] += Wf.data[row + cc] * dzf + Wi.data[row + cc] * dzi +
                       Wc.data[row + cc] * dzg + Wo.data[row + cc] * dzo;
      }
    }
    for (int j = 0; j < H; ++j) dh_prev[j] += dconcat[j];
    for (int cc = 0; cc < m; ++cc) dfused.at(t, cc) = dconcat[H + cc];
    dh = std::move(dh_prev);
    dc = std::move(dc_prev);
  }

  Mat dfeatures(tape.features.rows, tape.features.cols);
  if (cfg.attention) {
    Mat dgate(tape.gate.rows, tape.gate.cols);
    for (std::size_t i = 0; i < dfused.d.size(); ++i) {
      dfeatures.d[i] = dfused.d[i] * tape.gate.d[i];
      dgate.d[i] = dfused.d[i] * tape.features.d[i];
    }
    // sigmoid + nearest-neighbour upsample
    Mat dproj(tape.att_proj.rows, tape.att_proj.cols);
    for (int i = 0; i < tape.gate.rows; ++i) {
      const int src = tape.upsample_src[i];
      for (int ch = 0; ch < tape.gate.cols; ++ch) {
        const double g = tape.gate.at(i, ch);
        dproj.at(src, ch) += dgate.at(i, ch) * g * (1.0 - g);
      }
    }
    const Mat& proj_input =
        tape.att.empty() ? tape.features : tape.att.back().pooled;
    Mat dproj_input(proj_input.rows, proj_input.cols);
    conv1d_backward(proj_input, params.find("att_proj.kernel"), dproj,
                    grads.find("att_proj.kernel"), grads.find("att_proj.bias"),
                    &dproj_input);
    Mat dcur = std::move(dproj_input);
    for (int i = static_cast<int>(tape.att.size()) - 1; i >= 0; --i) {
      const auto& lt = tape.att[i];
      Mat dpre = relu_pool_backward(lt, dcur);
      Mat dinput(lt.input.rows, lt.input.cols);
      conv1d_backward(lt.input, params.find("att" + std::to_string(i) + ".kernel"),
                      dpre, grads.find("att" + std::to_string(i) + ".kernel"),
                      grads.find("att" + std::to_string(i) + ".bias"), &dinput);
      dcur = std::move(dinput);
    }
    // the attention branch reads the same features it gates
    for (std::size_t i = 0; i < dfeatures.d.size(); ++i)
      dfeatures.d[i] += dcur.d[i];
  } else {
    dfeatures = dfused;
  }

  Mat dcur = std::move(dfeatures);
  for (int i = static_cast<int>(tape.cnn.size()) - 1; i >= 0; --i) {
    const auto& lt = tape.cnn[i];
    Mat dpre = relu_pool_backward(lt, dcur);
    Mat* dinput_ptr = nullptr;
    Mat dinput;
    if (i > 0) {
      dinput = Mat(lt.input.rows, lt.input.cols);
      dinput_ptr = &dinput;
    }
    conv1d_backward(lt.input, params.find("cnn" + std::to_string(i) + ".kernel"),
                    dpre, grads.find("cnn" + std::to_string(i) + ".kernel"),
                    grads.find("cnn" + std::to_string(i) + ".bias"), dinput_ptr);
    if (i > 0) dcur = std::move(dinput);
  }

  BackwardResult res;
  res.grad = grads.flatten();
  if (lambda != 0.0) {
    const auto flat = params.flatten();
    double sumsq = 0.0;
    for (std::size_t j = 0; j < flat.size(); ++j) {
      sumsq += flat[j] * flat[j];
      res.grad[j] += 2.0 * lambda * flat[j];
    }
    loss += lambda * sumsq;
  }
  res.loss = loss;
  return res;
}

}  // namespace fedad
