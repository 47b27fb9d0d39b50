#include <doctest.h>

#include "../oracles.hpp"
#include "helpers.hpp"
#include "tabrag/importance.hpp"

using namespace tabrag;

TEST_CASE("pearson examples") {
  const auto rows = testing::iota_rows(3);
  CHECK(pearson_importance(testing::regression_1d({1, 2, 3}, {2, 4, 6}), rows)[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pearson_importance(testing::regression_1d({1, 2, 3}, {6, 4, 2}), rows)[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pearson_importance(testing::regression_1d({5, 5, 5}, {6, 4, 2}), rows)[0] == 0.0);
}

TEST_CASE("abs_pearson skips missing pairs and degenerate input") {
  const double x[] = {1, 2, NAN, 3};
  const double y[] = {2, 4, 100, 6};
  CHECK(abs_pearson(x, y) == doctest::Approx(1.0));
  const double one[] = {1};
  CHECK(abs_pearson(one, one) == 0.0);
}

TEST_CASE("pearson matches indicator-vector oracle on mixed data") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Dataset d = testing::random_mixed(seed, 40 + seed * 3, 5, seed % 2 == 0);
    const auto rows = testing::iota_rows(d.num_rows());
    const auto got = pearson_importance(d, rows);
    const auto want = oracle::pearson_weights(d, rows);
    REQUIRE(got.size() == want.size());
    for (std::size_t f = 0; f < got.size(); ++f) {
      CHECK(got[f] == doctest::Approx(want[f]).epsilon(1e-12));
      CHECK(got[f] >= 0.0);
      CHECK(got[f] <= 1.0);
    }
  }
}

TEST_CASE("pearson weight is scale invariant") {
  Rng rng(2);
  std::vector<double> x;
  std::vector<double> y;
  for (int i = 0; i < 100; ++i) {
    x.push_back(rng.normal());
    y.push_back(x.back() + rng.normal());
  }
  std::vector<double> scaled = x;
  for (double& v : scaled) v *= 1234.5;
  const auto rows = testing::iota_rows(x.size());
  const double a = pearson_importance(testing::regression_1d(x, y), rows)[0];
  const double b = pearson_importance(testing::regression_1d(scaled, y), rows)[0];
  CHECK(std::abs(a - b) <= 1e-12);
}

TEST_CASE("pps of a noise-free threshold rule") {
  std::vector<double> x;
  std::vector<std::string> y;
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    x.push_back(rng.normal());
    y.push_back(x.back() > 0 ? "1" : "0");
  }
  const Dataset d = testing::classification_1d(x, y);
  const double s = pps_importance(d, testing::iota_rows(200))[0];
  CHECK(s >= 0.95);
}

TEST_CASE("pps of an independent feature is near zero for regression") {
  std::vector<double> x;
  std::vector<double> y;
  Rng rng(4);
  for (int i = 0; i < 300; ++i) {
    x.push_back(rng.normal());
    y.push_back(rng.normal());
  }
  const double s = pps_importance(testing::regression_1d(x, y), testing::iota_rows(300))[0];
  CHECK(s >= 0.0);
  CHECK(s < 0.05);
}

TEST_CASE("pps of an independent feature for classification") {
  // The most-frequent-class baseline scores F1w = 1/3 on balanced labels and
  // a tree fitted to noise does about as well as a coin flip (F1w = 1/2,
  // score 0.25), so the score is clipped but not near zero. It stays far
  // below that of an informative feature.
  std::vector<double> x;
  Rng rng(4);
  for (int i = 0; i < 300; ++i) x.push_back(rng.normal());
  std::vector<std::string> labels;
  for (int i = 0; i < 300; ++i) labels.push_back(i % 2 ? "a" : "b");
  const auto perm = permutation(300, 8);
  std::vector<double> xp;
  for (auto p : perm) xp.push_back(x[p]);
  const double c = pps_importance(testing::classification_1d(xp, labels), testing::iota_rows(300))[0];
  CHECK(c >= 0.0);
  CHECK(c < 0.5);
}

TEST_CASE("pps of a feature identical to the label is one") {
  std::vector<double> x;
  for (int i = 0; i < 40; ++i) x.push_back(static_cast<double>(i % 10));
  const double s = pps_importance(testing::regression_1d(x, x), testing::iota_rows(x.size()))[0];
  CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("pps edge cases") {
  PpsOptions opts;
  SingleFeatureProblem p;
  p.x = {1, 2, 3};
  p.y = {1, 2, 3};
  CHECK(pps_score(p, opts) == 0.0);  // fewer samples than folds
  p.x = {1, 2, 3, 4, 5, 6};
  p.y = {7, 7, 7, 7, 7, 7};
  CHECK(pps_score(p, opts) == 0.0);  // naive MAE is zero
  p.task = TaskKind::kClassification;
  p.num_classes = 2;
  p.y = {1, 1, 1, 1, 1, 1};
  CHECK(pps_score(p, opts) == 0.0);  // naive F1 is one
}

TEST_CASE("kfold assignment layout") {
  const auto f = kfold_assignment(10, 4, 3);
  std::vector<int> count(4, 0);
  for (auto v : f) ++count[v];
  CHECK(count == std::vector<int>{3, 3, 2, 2});
  CHECK(f == kfold_assignment(10, 4, 3));
}

TEST_CASE("quantile candidates") {
  std::vector<double> v;
  for (int i = 0; i <= 100; ++i) v.push_back(i);
  const auto c = quantile_candidates(v, 50);
  CHECK(c.size() == 49);
  CHECK(c.front() == 2.0);
  CHECK(c.back() == 98.0);
  CHECK(c == oracle::candidates(v, 50));
  const double few[] = {3, 3, 3, 8};
  CHECK(quantile_candidates(few, 50) == std::vector<double>{3});
}

TEST_CASE("pps matches the brute-force tree on small problems") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    SingleFeatureProblem p;
    p.categorical = seed % 4 == 3;
    p.task = seed % 2 ? TaskKind::kClassification : TaskKind::kRegression;
    p.num_classes = p.task == TaskKind::kClassification ? 3 : 0;
    const auto n = 20 + rng.below(100);
    for (std::uint64_t i = 0; i < n; ++i) {
      const double x = p.categorical ? static_cast<double>(rng.below(5)) : std::round(rng.normal() * 6.0);
      p.x.push_back(x);
      if (p.task == TaskKind::kClassification) {
        p.y.push_back(static_cast<double>((static_cast<std::uint64_t>(std::abs(x)) + rng.below(2)) % 3));
      } else {
        p.y.push_back(x * x + rng.normal());
      }
    }
    PpsOptions opts;
    opts.seed = seed;
    CHECK(std::abs(pps_score(p, opts) - oracle::pps(p, opts)) <= 1e-9);
  }
}

TEST_CASE("pps is deterministic and bounded") {
  const Dataset d = testing::random_mixed(3, 150, 6, true);
  const auto rows = testing::iota_rows(d.num_rows());
  PpsOptions opts;
  opts.seed = 9;
  const auto a = pps_importance(d, rows, opts);
  opts.threads = 3;
  const auto b = pps_importance(d, rows, opts);
  CHECK(a == b);
  for (double w : a) {
    CHECK(w >= 0.0);
    CHECK(w <= 1.0);
  }
}

TEST_CASE("combine modes") {
  FeatureWeights w;
  w.features = {"a", "b", "c"};
  w.pearson = {0.1, 0.2, 0.3};
  w.pps = {0.5, 0.0, 0.7};
  const auto uniform = combine(w, ImportanceMode::kUniform);
  CHECK(uniform.primary == std::vector<double>{1, 1, 1});
  const auto pps = combine(w, ImportanceMode::kPpsOnly);
  CHECK(pps.primary == w.pps);
  CHECK_FALSE(pps.secondary);
  CHECK(combine(w, ImportanceMode::kPearsonOnly).primary == w.pearson);
  const auto dual = combine(w, ImportanceMode::kDual);
  CHECK(dual.primary == w.pearson);
  REQUIRE(dual.secondary);
  CHECK(*dual.secondary == w.pps);
  CHECK_THROWS(parse_importance_mode("bogus"));
  CHECK(parse_importance_mode("pps_only") == ImportanceMode::kPpsOnly);
}

TEST_CASE("feature weights cover every feature and round trip") {
  const Dataset d = testing::random_mixed(6, 80, 4, false);
  const auto w = compute_feature_weights(d, testing::iota_rows(d.num_rows()));
  CHECK(w.size() == 4);
  CHECK(w.pearson.size() == 4);
  CHECK(w.pps.size() == 4);
  const auto back = weights_from_json(weights_to_json(w));
  CHECK(back.features == w.features);
  CHECK(back.pearson == w.pearson);
  CHECK(back.pps == w.pps);
}
