#include <doctest.h>

#include <algorithm>

#include "../oracles.hpp"
#include "helpers.hpp"
#include "tabrag/normalize.hpp"

using namespace tabrag;

TEST_CASE("quantile knots are the sorted sample") {
  const double v[] = {3, 1, 4, 2};
  const auto s = fit_column_stats("x", v, NormMode::kQuantile);
  CHECK(s.quantile_knots == std::vector<double>{1, 2, 3, 4});
  CHECK(s.n_seen == 4);
}

TEST_CASE("constant column under standard mode is degenerate") {
  const double v[] = {5, 5, 5};
  const auto s = fit_column_stats("x", v, NormMode::kStandard);
  CHECK(s.mean == 5.0);
  CHECK(s.stddev == 0.0);
  CHECK(s.degenerate());
  CHECK(apply(s, 7.0) == 0.0);
  CHECK(apply(s, 7.0, NormMode::kQuantile) == 0.5);
  CHECK(apply(s, 7.0, NormMode::kMinMax) == 0.5);
}

TEST_CASE("all-missing column normalizes to 0.5") {
  const double v[] = {NAN, NAN};
  const auto s = fit_column_stats("x", v, NormMode::kQuantile);
  CHECK(s.degenerate());
  CHECK(s.n_seen == 0);
  for (double x : {-1e9, 0.0, 3.0}) CHECK(apply(s, x) == 0.5);
}

TEST_CASE("apply examples") {
  const double v[] = {1, 2, 3, 4, 5};
  const auto s = fit_column_stats("x", v, NormMode::kQuantile);
  CHECK(apply(s, 3.0) == 0.5);
  CHECK(apply(s, 100.0) == 1.0);
  CHECK(apply(s, -100.0) == 0.0);
  CHECK(apply(s, 2.5) == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(std::isnan(apply(s, NAN)));

  ColumnStats st;
  st.mean = 10.0;
  st.stddev = 2.0;
  st.min = 0.0;
  st.max = 20.0;
  st.n_seen = 3;
  CHECK(apply(st, 14.0, NormMode::kStandard) == 2.0);
  CHECK(apply(st, 5.0, NormMode::kMinMax) == 0.25);
  CHECK(apply(st, 50.0, NormMode::kMinMax) == 1.0);
  CHECK(apply(st, 50.0, NormMode::kNone) == 50.0);
}

TEST_CASE("runs of equal knots map to their mid position") {
  const double knots[] = {1, 2, 2, 2, 3};
  CHECK(quantile_position(knots, 2.0) == 0.5);
  CHECK(quantile_position(knots, 1.0) == 0.0);
  CHECK(quantile_position(knots, 3.0) == 1.0);
}

TEST_CASE("population standard deviation") {
  const double v[] = {2, 4, 4, 4, 5, 5, 7, 9};
  const auto s = fit_column_stats("x", v, NormMode::kStandard);
  CHECK(s.mean == 5.0);
  CHECK(s.stddev == 2.0);
}

TEST_CASE("large pools keep 1000 evenly spaced knots") {
  std::vector<double> v(5000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>((i * 7919) % 5000);
  const auto s = fit_column_stats("x", v, NormMode::kQuantile);
  CHECK(s.quantile_knots.size() == kMaxQuantileKnots);
  CHECK(s.quantile_knots.front() == 0.0);
  CHECK(s.quantile_knots.back() == 4999.0);
  CHECK(std::is_sorted(s.quantile_knots.begin(), s.quantile_knots.end()));
  const oracle::Normalizer o(v, NormMode::kQuantile);
  CHECK(o.knots == s.quantile_knots);
}

TEST_CASE("quantile position matches the counting oracle") {
  Rng rng(17);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> knots;
    const auto k = 1 + rng.below(40);
    for (std::uint64_t i = 0; i < k; ++i) knots.push_back(std::round(rng.normal() * 3.0));
    std::sort(knots.begin(), knots.end());
    for (int q = 0; q < 20; ++q) {
      const double v = q % 2 ? std::round(rng.normal() * 4.0) : rng.normal() * 4.0;
      CHECK(quantile_position(knots, v) == oracle::ecdf(knots, v));
    }
  }
}

TEST_CASE("monotone and bounded for quantile and minmax") {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> v;
    for (int i = 0; i < 30; ++i) v.push_back(std::round(rng.normal() * 5.0));
    for (NormMode mode : {NormMode::kQuantile, NormMode::kMinMax}) {
      const auto s = fit_column_stats("x", v, mode);
      std::vector<double> probes;
      for (int i = 0; i < 100; ++i) probes.push_back(rng.normal() * 8.0);
      std::sort(probes.begin(), probes.end());
      double prev = -1.0;
      for (double p : probes) {
        const double y = apply(s, p);
        CHECK(y >= 0.0);
        CHECK(y <= 1.0);
        CHECK(y >= prev);
        prev = y;
      }
    }
  }
}

TEST_CASE("stats depend on training rows only") {
  Dataset a = testing::regression_1d({1, 2, 3, 4, 100}, {0, 0, 0, 0, 0});
  Dataset b = testing::regression_1d({1, 2, 3, 4, -7}, {0, 0, 0, 0, 0});
  const std::vector<std::size_t> train{0, 1, 2, 3};
  const auto sa = fit_stats(a, train);
  const auto sb = fit_stats(b, train);
  REQUIRE(sa.size() == 1);
  CHECK(sa[0].quantile_knots == sb[0].quantile_knots);
  CHECK(sa[0].mean == sb[0].mean);
  CHECK(sa[0].max == sb[0].max);
}

TEST_CASE("stats json round trip") {
  const double v[] = {1.25, 2, 9, NAN};
  const auto s = fit_column_stats("x", v, NormMode::kStandard);
  const auto back = stats_from_json(stats_to_json(std::vector<ColumnStats>{s}));
  REQUIRE(back.size() == 1);
  CHECK(back[0].column == "x");
  CHECK(back[0].mode == NormMode::kStandard);
  CHECK(back[0].quantile_knots == s.quantile_knots);
  CHECK(back[0].mean == s.mean);
  CHECK(back[0].stddev == s.stddev);
  CHECK(back[0].n_seen == 3);
}
