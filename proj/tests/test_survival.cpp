#include <doctest.h>

#include <random>

#include "churn/error.hpp"
#include "churn/survival.hpp"
#include "test_support.hpp"

using namespace churn;

TEST_CASE("kaplan_meier matches the direct product-limit oracle on random weighted instances") {
  std::mt19937_64 gen(11);
  for (int rep = 0; rep < 300; ++rep) {
    const auto inst = oracle::random_instance(gen, 1 + rep % 15, rep % 3 == 0);
    const auto curve = kaplan_meier(inst.samples, inst.weights);
    const auto [grid, probs] = oracle::km(inst.samples, inst.weights);
    REQUIRE(curve.grid() == grid);
    for (std::size_t k = 0; k < grid.size(); ++k) CHECK(curve.probs()[k] == doctest::Approx(probs[k]).epsilon(1e-12));
  }
}

TEST_CASE("events precede censorings at tied times") {
  // Three subjects at t=2: one event, one censoring; one survivor beyond.
  std::vector<SurvivalSample> s = {{2, true}, {2, false}, {5, false}};
  std::vector<double> w(3, 1.0);
  const auto c = kaplan_meier(s, w);
  REQUIRE(c.size() == 1);
  CHECK(c.probs()[0] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("curve evaluation is right-continuous with left limits") {
  SurvivalCurve c({1.0, 3.0}, {0.8, 0.4});
  CHECK(c(0.5) == 1.0);
  CHECK(c(1.0) == 0.8);
  CHECK(c.left_limit(1.0) == 1.0);
  CHECK(c(2.9) == 0.8);
  CHECK(c(3.0) == 0.4);
  CHECK(c.left_limit(3.0) == 0.8);
  CHECK(c(100.0) == 0.4);
  CHECK(median_survival(c) == doctest::Approx(3.0));
  CHECK_FALSE(median_survival(SurvivalCurve({1.0}, {0.6})).has_value());
}

TEST_CASE("zero-weight subjects are ignored and integer weights equal duplication") {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> wdist(0, 3);
  for (int rep = 0; rep < 100; ++rep) {
    auto inst = oracle::random_instance(gen, 10, true);
    std::vector<SurvivalSample> dup;
    for (std::size_t i = 0; i < inst.samples.size(); ++i) {
      inst.weights[i] = wdist(gen);
      for (int k = 0; k < inst.weights[i]; ++k) dup.push_back(inst.samples[i]);
    }
    if (dup.empty()) continue;
    const auto a = kaplan_meier(inst.samples, inst.weights);
    const auto b = kaplan_meier(dup, std::vector<double>(dup.size(), 1.0));
    REQUIRE(a.grid() == b.grid());
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a.probs()[k] == doctest::Approx(b.probs()[k]).epsilon(1e-12));
  }
}

TEST_CASE("nelson_aalen matches the direct sum and shares the KM grid") {
  std::mt19937_64 gen(3);
  for (int rep = 0; rep < 100; ++rep) {
    const auto inst = oracle::random_instance(gen, 12, false);
    const auto h = nelson_aalen(inst.samples, inst.weights);
    const auto km = kaplan_meier(inst.samples, inst.weights);
    REQUIRE(h.grid() == km.grid());
    for (double t : {0.0, 0.7, 1.5, 2.25, 4.0, 10.0})
      CHECK(h(t) == doctest::Approx(oracle::na_at(inst.samples, inst.weights, t)).epsilon(1e-12));
  }
}

TEST_CASE("all-censored input gives an empty curve that evaluates to one") {
  std::vector<SurvivalSample> s = {{1, false}, {2, false}};
  const auto c = kaplan_meier(s, std::vector<double>{1, 1});
  CHECK(c.empty());
  CHECK(c(5.0) == 1.0);
}

TEST_CASE("invalid inputs are rejected") {
  CHECK_THROWS_AS(validate_sample({-1.0, true}), InvalidInput);
  CHECK_THROWS_AS(validate_sample({std::nan(""), true}), InvalidInput);
  CHECK_THROWS_AS(SurvivalCurve({2.0, 1.0}, {0.5, 0.4}), InvalidInput);
  CHECK_THROWS_AS(SurvivalCurve({1.0, 2.0}, {0.5, 0.6}), InvalidInput);
  std::vector<SurvivalSample> s = {{1, true}};
  CHECK_THROWS_AS(kaplan_meier(s, std::vector<double>{1, 2}), InvalidInput);
}

TEST_CASE("average_curves is the pointwise mean on the union grid") {
  SurvivalCurve a({1.0}, {0.5}), b({2.0}, {0.0});
  std::vector<SurvivalCurve> cs = {a, b};
  const auto m = average_curves(cs);
  REQUIRE(m.grid() == std::vector<double>{1.0, 2.0});
  CHECK(m.probs()[0] == doctest::Approx(0.75));
  CHECK(m.probs()[1] == doctest::Approx(0.25));
}
