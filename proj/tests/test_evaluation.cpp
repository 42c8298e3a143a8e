#include <doctest.h>

#include <random>

#include "churn/error.hpp"
#include "churn/evaluation.hpp"
#include "test_support.hpp"

using namespace churn;

namespace {

SurvivalCurve constant(double p) { return SurvivalCurve({0.0}, {p}); }

std::vector<SurvivalSample> six_subjects() {
  return {{1, true}, {2, false}, {3, true}, {4, false}, {5, true}, {6, true}};
}

std::vector<SurvivalCurve> six_predictions() {
  return {constant(0.2), constant(0.5), constant(0.4), constant(0.7), constant(0.9), constant(0.6)};
}

}  // namespace

TEST_CASE("without censoring the Brier score is the plain MSE") {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u;
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 5 + rep % 10;
    std::vector<SurvivalSample> s;
    std::vector<SurvivalCurve> curves;
    for (std::size_t i = 0; i < n; ++i) {
      s.push_back({std::floor(u(gen) * 10.0) + 1.0, true});
      const double a = u(gen), b = u(gen);
      curves.push_back(SurvivalCurve({1.5, 4.5}, {std::max(a, b), std::min(a, b)}));
    }
    const auto g = censoring_km(s);
    for (double t : {0.5, 2.0, 4.5, 7.0}) {
      double mse = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double y = s[i].time > t ? 1.0 : 0.0;
        mse += (y - curves[i](t)) * (y - curves[i](t));
      }
      CHECK(std::fabs(brier_score(curves, s, t, g) - mse / n) < 1e-12);
    }
  }
}

TEST_CASE("constant one-half prediction integrates to one quarter") {
  std::vector<SurvivalSample> s = {{1, true}, {3, true}, {4, true}, {7, true}};
  std::vector<SurvivalCurve> curves(4, constant(0.5));
  CHECK(integrated_brier(curves, s, 6.0, 100) == 0.25);
}

TEST_CASE("censored six-subject fixture matches the hand expansion") {
  const auto s = six_subjects();
  const auto curves = six_predictions();
  const auto g = censoring_km(s);
  CHECK(g(2.0) == doctest::Approx(0.8));
  CHECK(g(4.0) == doctest::Approx(8.0 / 15.0));
  // t = 3.5: subject 2 is censored before t; G(3-) = G(3.5) = 4/5.
  const double at35 = (0.04 + 0.16 / 0.8 + 0.09 / 0.8 + 0.01 / 0.8 + 0.16 / 0.8) / 6.0;
  CHECK(brier_score(curves, s, 3.5, g) == doctest::Approx(at35).epsilon(1e-14));
  // t = 5.5: subjects 2 and 4 drop out; G(5-) = G(5.5) = 8/15.
  const double at55 = (0.04 + 0.16 / 0.8 + 0.81 / (8.0 / 15.0) + 0.16 / (8.0 / 15.0)) / 6.0;
  CHECK(brier_score(curves, s, 5.5, g) == doctest::Approx(at55).epsilon(1e-14));
}

TEST_CASE("a zero censoring survivor inside the horizon is reported") {
  // Only possible when G comes from other data, as in holdout scoring.
  std::vector<SurvivalSample> s = {{1, true}, {3, true}, {6, false}};
  std::vector<SurvivalCurve> curves(3, constant(0.5));
  const SurvivalCurve g({2.0}, {0.0});
  CHECK_NOTHROW(brier_score(curves, s, 1.5, g));
  CHECK_THROWS_AS(brier_score(curves, s, 2.5, g), EvaluationHorizonError);
  CHECK_THROWS_AS(brier_score(curves, s, 3.5, g), EvaluationHorizonError);
}

TEST_CASE("trapezoid mean and uniform grid") {
  const auto grid = uniform_grid(4.0, 5);
  CHECK(grid == std::vector<double>{0, 1, 2, 3, 4});
  const std::vector<double> v = {0, 1, 2, 3, 4};
  CHECK(trapezoid_mean(grid, v) == doctest::Approx(2.0));
  CHECK_THROWS_AS(uniform_grid(0.0, 5), InvalidInput);
  CHECK_THROWS_AS(uniform_grid(1.0, 1), InvalidInput);
}

TEST_CASE("default horizon is the event-time quantile") {
  std::vector<SurvivalSample> s;
  for (int i = 1; i <= 20; ++i) s.push_back({static_cast<double>(i), i % 4 != 0});
  // 15 events; ceil(0.95 * 15) = 15th event time.
  CHECK(default_horizon(s) == 19.0);
}

TEST_CASE("holdout split is a deterministic partition") {
  const auto a = holdout_split(100, 0.3, 5), b = holdout_split(100, 0.3, 5);
  CHECK(a.test == b.test);
  CHECK(a.test.size() == 30);
  CHECK(a.train.size() == 70);
  std::vector<std::size_t> all = a.train;
  all.insert(all.end(), a.test.begin(), a.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 100; ++i) CHECK(all[i] == i);
  CHECK(holdout_split(100, 0.3, 6).test != a.test);
}

TEST_CASE("bootstrap is reproducible across worker counts") {
  const auto data = oracle::synthetic(12, 60, 3, 2);
  ModelSpec spec;
  spec.type = ModelType::cox;
  BootstrapOptions opt;
  opt.replicates = 40;
  opt.seed = 3;
  const auto a = bootstrap_cv(data, spec, opt);
  opt.workers = 4;
  const auto b = bootstrap_cv(data, spec, opt);
  CHECK(a.bootstrap_mean == b.bootstrap_mean);
  CHECK(a.bootstrap_sd == b.bootstrap_sd);
  CHECK(a.ibs == b.ibs);
  CHECK(a.bootstrap_sd > 0.0);
  opt.seed = 4;
  CHECK(bootstrap_cv(data, spec, opt).bootstrap_mean != a.bootstrap_mean);
}

TEST_CASE("deviation export skips censored subjects and unreached medians") {
  std::vector<SurvivalSample> s = {{4, true}, {5, false}, {10, true}};
  const auto data = churn::Dataset({"x"}, {{0, 1, 2}}, s, {"a", "b", "c"});
  std::vector<SurvivalCurve> curves = {SurvivalCurve({2.0, 5.0}, {0.7, 0.4}), constant(0.1),
                                       SurvivalCurve({3.0}, {0.6})};
  const auto t = deviation_export(curves, data);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0].id == "a");
  CHECK(t.rows[0].predicted == 5.0);
  CHECK(t.rows[0].relative_deviation == doctest::Approx(0.25));
  CHECK(t.excluded_censored == 1);
  CHECK(t.excluded_unreached == 1);
  CHECK(interquartile_range({1, 2, 3, 4, 5}) == doctest::Approx(2.0));
}
