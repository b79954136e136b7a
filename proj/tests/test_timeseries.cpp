#include <doctest.h>

#include <random>
#include <set>

#include "fedad/timeseries.hpp"

using namespace fedad;

TEST_CASE("parse: single-column series preserves row order") {
  auto s = parse_series("0.0\n5.0\n10.0\n", 1, false, "t");
  REQUIRE(s.points.size() == 3);
  CHECK(s.points[0][0] == 0.0);
  CHECK(s.points[1][0] == 5.0);
  CHECK(s.points[2][0] == 10.0);
  CHECK_FALSE(s.has_labels());
}

TEST_CASE("parse: malformed row reports 1-based location") {
  try {
    parse_series("1.0\nabc\n3.0\n", 1, false, "t");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.row == 2);
    CHECK(e.column == 1);
  }
}

TEST_CASE("parse: trailing label column") {
  auto s = parse_series("1.0,0\n2.0,0\n9.0,1\n2.0,0\n", 1, true, "t");
  REQUIRE(s.labels.size() == 4);
  CHECK(s.labels == std::vector<bool>{false, false, true, false});
}

TEST_CASE("parse: comments, blank lines, and whitespace separation") {
  auto s = parse_series("# header\n\n1.5 2.5\n3.0 4.0\n", 2, false, "t");
  REQUIRE(s.points.size() == 2);
  CHECK(s.points[1][1] == 4.0);
}

TEST_CASE("parse: wrong column count is an error") {
  CHECK_THROWS_AS(parse_series("1.0,2.0\n", 1, false, "t"), ParseError);
}

TEST_CASE("load_csv: missing file") {
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", 1, false),
                  FileNotFoundError);
}

TEST_CASE("fit_normalizer: extrema") {
  auto s = parse_series("0\n5\n10\n", 1, false, "t");
  auto p = fit_normalizer(s);
  CHECK(p.min[0] == 0.0);
  CHECK(p.max[0] == 10.0);
}

TEST_CASE("fit_normalizer: constant series") {
  auto s = parse_series("3\n3\n", 1, false, "t");
  auto p = fit_normalizer(s);
  CHECK(p.min[0] == 3.0);
  CHECK(p.max[0] == 3.0);
}

TEST_CASE("fit_normalizer: per-dimension extrema") {
  auto s = parse_series("1,-2\n0,4\n", 2, false, "t");
  auto p = fit_normalizer(s);
  CHECK(p.min == std::vector<double>{0.0, -2.0});
  CHECK(p.max == std::vector<double>{1.0, 4.0});
}

TEST_CASE("fit_normalizer: empty series") {
  RawSeries s;
  s.dims = 1;
  CHECK_THROWS_AS(fit_normalizer(s), EmptySeriesError);
}

TEST_CASE("normalize: maps to [0,1]") {
  auto s = parse_series("0\n5\n10\n", 1, false, "t");
  auto out = normalize(s, fit_normalizer(s));
  CHECK(out.points[0][0] == 0.0);
  CHECK(out.points[1][0] == 0.5);
  CHECK(out.points[2][0] == 1.0);
}

TEST_CASE("normalize: degenerate range maps to 0") {
  auto s = parse_series("3\n3\n", 1, false, "t");
  auto out = normalize(s, fit_normalizer(s));
  CHECK(out.points[0][0] == 0.0);
  CHECK(out.points[1][0] == 0.0);
}

TEST_CASE("normalize: identity on already-normalized input") {
  auto s = parse_series("0\n1\n", 1, false, "t");
  NormalizationParams p{{0.0}, {1.0}};
  auto out = normalize(s, p);
  CHECK(out.points[0][0] == 0.0);
  CHECK(out.points[1][0] == 1.0);
}

TEST_CASE("normalize: dimension mismatch") {
  auto s = parse_series("1\n2\n", 1, false, "t");
  NormalizationParams p{{0.0, 0.0}, {1.0, 1.0}};
  CHECK_THROWS_AS(normalize(s, p), DimensionMismatchError);
}

TEST_CASE("normalize/denormalize round-trip") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-50.0, 50.0);
  RawSeries s;
  s.dims = 3;
  for (int i = 0; i < 100; ++i)
    s.points.push_back({dist(rng), dist(rng), dist(rng)});
  auto p = fit_normalizer(s);
  auto back = denormalize(normalize(s, p), p);
  for (std::size_t i = 0; i < s.points.size(); ++i)
    for (int j = 0; j < 3; ++j) {
      const double orig = s.points[i][j];
      CHECK(std::abs(back.points[i][j] - orig) <=
            1e-12 * std::max(1.0, std::abs(orig)));
    }
}

TEST_CASE("make_windows: count is n - 2T + 1") {
  RawSeries s;
  s.dims = 1;
  for (int i = 0; i < 10; ++i) s.points.push_back({double(i)});
  auto w = make_windows(s, 3);
  REQUIRE(w.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(w[i].start_index == i);
}

TEST_CASE("make_windows: minimal case") {
  RawSeries s;
  s.dims = 1;
  s.points = {{1.0}, {2.0}};
  auto w = make_windows(s, 1);
  REQUIRE(w.size() == 1);
  CHECK(w[0].history == std::vector<double>{1.0});
  CHECK(w[0].horizon == std::vector<double>{2.0});
}

TEST_CASE("make_windows: too short") {
  RawSeries s;
  s.dims = 1;
  for (int i = 0; i < 5; ++i) s.points.push_back({double(i)});
  CHECK_THROWS_AS(make_windows(s, 3), SeriesTooShortError);
}

TEST_CASE("make_windows: property over random n, T") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int T = 1 + int(rng() % 8);
    const int n = 2 * T + int(rng() % 30);
    RawSeries s;
    s.dims = 1;
    for (int i = 0; i < n; ++i) s.points.push_back({double(i)});
    auto w = make_windows(s, T);
    CHECK(w.size() == static_cast<std::size_t>(n - 2 * T + 1));
    // horizon rows follow the history contiguously
    for (const auto& pair : w)
      for (int t = 0; t < T; ++t)
        CHECK(pair.horizon[t] == double(pair.start_index + T + t));
  }
}

TEST_CASE("make_windows: label set iff any horizon point is anomalous") {
  auto s = parse_series("0,0\n1,0\n2,0\n3,1\n", 1, true, "t");
  auto w = make_windows(s, 1);
  REQUIRE(w.size() == 3);
  CHECK_FALSE(w[0].label);  // horizon = point 1
  CHECK_FALSE(w[1].label);
  CHECK(w[2].label);  // horizon = point 3
}

TEST_CASE("partition: 7:3 split on a single node") {
  RawSeries s;
  s.dims = 1;
  for (int i = 0; i < 21; ++i) s.points.push_back({double(i)});
  auto w = make_windows(s, 1);  // not used; build 10 windows manually below
  std::vector<WindowPair> windows(w.begin(), w.begin() + 10);
  auto parts = partition(windows, 1, 0.7, 0.0, 5);
  REQUIRE(parts.size() == 1);
  CHECK(parts[0].train.size() == 7);
  CHECK(parts[0].validation.empty());
  CHECK(parts[0].test.size() == 3);
}

TEST_CASE("partition: deterministic for a fixed seed") {
  RawSeries s;
  s.dims = 1;
  for (int i = 0; i < 30; ++i) s.points.push_back({double(i)});
  auto w = make_windows(s, 2);
  auto a = partition(w, 2, 0.7, 0.0, 99);
  auto b = partition(w, 2, 0.7, 0.0, 99);
  for (int k = 0; k < 2; ++k) {
    REQUIRE(a[k].train.size() == b[k].train.size());
    for (std::size_t i = 0; i < a[k].train.size(); ++i)
      CHECK(a[k].train[i].start_index == b[k].train[i].start_index);
  }
}

TEST_CASE("partition: too few windows") {
  RawSeries s;
  s.dims = 1;
  for (int i = 0; i < 8; ++i) s.points.push_back({double(i)});
  auto w = make_windows(s, 3);  // 3 windows
  CHECK_THROWS_AS(partition(w, 5, 0.7, 0.0, 1), TooFewWindowsError);
}

TEST_CASE("partition: invalid fractions") {
  std::vector<WindowPair> w(4);
  CHECK_THROWS_AS(partition(w, 1, 0.0, 0.0, 1), InvalidFractionsError);
  CHECK_THROWS_AS(partition(w, 1, 0.8, 0.3, 1), InvalidFractionsError);
}

TEST_CASE("partition: bijection, no loss or duplication") {
  RawSeries s;
  s.dims = 1;
  for (int i = 0; i < 60; ++i) s.points.push_back({double(i)});
  auto w = make_windows(s, 2);
  auto parts = partition(w, 3, 0.6, 0.1, 42);
  std::multiset<std::int64_t> seen;
  for (const auto& p : parts) {
    for (const auto& win : p.train) seen.insert(win.start_index);
    for (const auto& win : p.validation) seen.insert(win.start_index);
    for (const auto& win : p.test) seen.insert(win.start_index);
  }
  std::multiset<std::int64_t> expect;
  for (const auto& win : w) expect.insert(win.start_index);
  CHECK(seen == expect);
}
