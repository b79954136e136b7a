#include "fedad/timeseries.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace fedad {

namespace {

// Splits on commas and/or runs of whitespace.
std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',' || std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double parse_number(const std::string& tok, int row, int col) {
  double value{};
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last)
    throw ParseError(row, col, "expected a number, got '" + tok + "'");
  return value;
}

}  // namespace

RawSeries parse_series(const std::string& text, int dims, bool has_labels,
                       const std::string& name) {
  if (dims < 1) throw DimensionMismatchError("dims must be >= 1");
  RawSeries series;
  series.name = name;
  series.dims = dims;

  std::istringstream in(text);
  std::string line;
  int row = 0;
  const std::size_t want = static_cast<std::size_t>(dims) + (has_labels ? 1 : 0);
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto toks = tokenize(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    if (toks.size() != want)
      throw ParseError(row, static_cast<int>(toks.size()),
                       "expected " + std::to_string(want) + " columns, got " +
                           std::to_string(toks.size()));
    std::vector<double> point(dims);
    for (int j = 0; j < dims; ++j) point[j] = parse_number(toks[j], row, j + 1);
    series.points.push_back(std::move(point));
    if (has_labels) {
      double raw = parse_number(toks[dims], row, dims + 1);
      series.labels.push_back(raw != 0.0);
    }
  }
  return series;
}

RawSeries load_csv(const std::string& path, int dims, bool has_labels) {
  if (!std::filesystem::exists(path)) throw FileNotFoundError(path);
  std::ifstream in(path);
  if (!in) throw FileNotFoundError(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_series(buf.str(), dims, has_labels,
                      std::filesystem::path(path).stem().string());
}

NormalizationParams fit_normalizer(const RawSeries& series) {
  if (series.points.empty()) throw EmptySeriesError();
  const int d = series.dims;
  NormalizationParams p;
  p.min.assign(d, std::numeric_limits<double>::infinity());
  p.max.assign(d, -std::numeric_limits<double>::infinity());
  for (const auto& pt : series.points)
    for (int j = 0; j < d; ++j) {
      p.min[j] = std::min(p.min[j], pt[j]);
      p.max[j] = std::max(p.max[j], pt[j]);
    }
  return p;
}

RawSeries normalize(const RawSeries& series, const NormalizationParams& p) {
  if (static_cast<int>(p.min.size()) != series.dims ||
      static_cast<int>(p.max.size()) != series.dims)
    throw DimensionMismatchError("normalizer dims do not match series dims");
  RawSeries out = series;
  for (auto& pt : out.points)
    for (int j = 0; j < series.dims; ++j) {
      const double range = p.max[j] - p.min[j];
      pt[j] = range > 0.0 ? (pt[j] - p.min[j]) / range : 0.0;
    }
  return out;
}

RawSeries denormalize(const RawSeries& series, const NormalizationParams& p) {
  if (static_cast<int>(p.min.size()) != series.dims)
    throw DimensionMismatchError("normalizer dims do not match series dims");
  RawSeries out = series;
  for (auto& pt : out.points)
    for (int j = 0; j < series.dims; ++j) {
      const double range = p.max[j] - p.min[j];
      pt[j] = range > 0.0 ? pt[j] * range + p.min[j] : p.min[j];
    }
  return out;
}

std::vector<WindowPair> make_windows(const RawSeries& series, int T) {
  const auto n = static_cast<std::int64_t>(series.points.size());
  if (T < 1) throw SeriesTooShortError("window length must be >= 1");
  if (n < 2 * static_cast<std::int64_t>(T))
    throw SeriesTooShortError("series of length " + std::to_string(n) +
                              " is too short for window length " +
                              std::to_string(T));
  const int d = series.dims;
  std::vector<WindowPair> out;
  out.reserve(static_cast<std::size_t>(n - 2 * T + 1));
  for (std::int64_t s = 0; s + 2 * T <= n; ++s) {
    WindowPair w;
    w.T = T;
    w.dims = d;
    w.start_index = s;
    w.history.resize(static_cast<std::size_t>(T) * d);
    w.horizon.resize(static_cast<std::size_t>(T) * d);
    for (int t = 0; t < T; ++t)
      for (int j = 0; j < d; ++j) {
        w.history[static_cast<std::size_t>(t) * d + j] = series.points[s + t][j];
        w.horizon[static_cast<std::size_t>(t) * d + j] =
            series.points[s + T + t][j];
      }
    if (series.has_labels())
      for (int t = 0; t < T && !w.label; ++t)
        w.label = series.labels[static_cast<std::size_t>(s + T + t)];
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<NodePartition> partition(const std::vector<WindowPair>& windows,
                                     int nodes, double train_frac,
                                     double val_frac, std::uint64_t seed) {
  if (nodes < 1) throw InvalidFractionsError("node count must be >= 1");
  if (!(train_frac > 0.0) || val_frac < 0.0 || train_frac + val_frac >= 1.0)
    throw InvalidFractionsError(
        "need 0 < train_frac, 0 <= val_frac, train_frac + val_frac < 1");
  if (windows.size() < static_cast<std::size_t>(nodes))
    throw TooFewWindowsError(std::to_string(windows.size()) +
                             " windows cannot cover " + std::to_string(nodes) +
                             " nodes");

  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<WindowPair>> assigned(nodes);
  for (std::size_t i = 0; i < order.size(); ++i)
    assigned[i % nodes].push_back(windows[order[i]]);

  std::vector<NodePartition> out(nodes);
  for (int k = 0; k < nodes; ++k) {
    auto& mine = assigned[k];
    std::sort(mine.begin(), mine.end(),
              [](const WindowPair& a, const WindowPair& b) {
                return a.start_index < b.start_index;
              });
    const auto cnt = mine.size();
    const auto n_train = static_cast<std::size_t>(train_frac * cnt);
    const auto n_val = static_cast<std::size_t>(val_frac * cnt);
    out[k].node_id = k;
    out[k].train.assign(mine.begin(), mine.begin() + n_train);
    out[k].validation.assign(mine.begin() + n_train,
                             mine.begin() + n_train + n_val);
    out[k].test.assign(mine.begin() + n_train + n_val, mine.end());
  }
  return out;
}

}  // namespace fedad
