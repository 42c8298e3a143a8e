#include <doctest.h>

#include <algorithm>
#include <random>

#include "churn/error.hpp"
#include "churn/rank_stats.hpp"
#include "test_support.hpp"

using namespace churn;

TEST_CASE("logrank scores are event minus Nelson-Aalen hazard and sum to zero") {
  std::mt19937_64 gen(21);
  for (int rep = 0; rep < 100; ++rep) {
    auto inst = oracle::random_instance(gen, 2 + rep % 12, false);
    inst.samples[0].event = true;
    inst.weights[0] = 1.0;
    const auto a = logrank_scores(inst.samples, inst.weights);
    double wsum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double expect = (inst.samples[i].event ? 1.0 : 0.0) -
                            oracle::na_at(inst.samples, inst.weights, inst.samples[i].time);
      CHECK(a[i] == doctest::Approx(expect).epsilon(1e-12));
      wsum += inst.weights[i] * a[i];
    }
    CHECK(wsum == doctest::Approx(0.0).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("no positive-weight event raises DegenerateNode") {
  std::vector<SurvivalSample> s = {{1, false}, {2, true}};
  CHECK_THROWS_AS(logrank_scores(s, std::vector<double>{1.0, 0.0}), DegenerateNode);
}

TEST_CASE("conditional moments equal the exact permutation mean and variance") {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> z;
  std::bernoulli_distribution coin(0.5);
  for (int rep = 0; rep < 60; ++rep) {
    const std::size_t n = 2 + rep % 6;
    std::vector<double> a(n), h(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = z(gen);
      h[i] = rep % 2 ? z(gen) : (coin(gen) ? 1.0 : 0.0);
    }
    h[0] = 0.0;
    h[1] = 1.0;
    const std::vector<double> w(n, 1.0);
    const auto m = conditional_moments(a, h, w);
    REQUIRE(m.has_value());
    const auto [mean, var] = oracle::permutation_moments(a, h);
    CHECK(m->mu == doctest::Approx(mean).epsilon(1e-10));
    CHECK(m->sigma2 == doctest::Approx(var).epsilon(1e-10));
  }
}

TEST_CASE("degenerate covariates get no moments and a neutral test") {
  std::vector<double> a = {0.5, -0.5, 0.2}, h = {1, 1, 1}, w = {1, 1, 1};
  CHECK_FALSE(conditional_moments(a, h, w).has_value());
  const auto t = variable_test(a, h, w, 4);
  CHECK(t.covariate_index == 4);
  CHECK(t.statistic == 0.0);
  CHECK(t.p_value == 1.0);
}

TEST_CASE("normal tail probability") {
  CHECK(normal_two_sided_p(0.0) == doctest::Approx(1.0));
  CHECK(normal_two_sided_p(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(normal_two_sided_p(-1.959963984540054) == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("p-values are approximately uniform under the null") {
  // Kolmogorov-Smirnov distance of 2000 null p-values from U(0,1).
  std::mt19937_64 gen(99);
  std::normal_distribution<double> z;
  std::exponential_distribution<double> e(1.0);
  std::vector<double> ps;
  for (int rep = 0; rep < 2000; ++rep) {
    const std::size_t n = 60;
    std::vector<SurvivalSample> s(n);
    std::vector<double> x(n), w(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = e(gen), c = e(gen) * 2.0;
      s[i] = {std::min(t, c), t <= c};
      x[i] = z(gen);
    }
    s[0].event = true;
    const auto a = logrank_scores(s, w);
    ps.push_back(variable_test(a, x, w).p_value);
  }
  std::sort(ps.begin(), ps.end());
  double d = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double n = static_cast<double>(ps.size());
    d = std::max({d, std::fabs((i + 1) / n - ps[i]), std::fabs(ps[i] - i / n)});
  }
  CHECK(d < 0.05);
}

TEST_CASE("best split point matches exhaustive enumeration") {
  std::mt19937_64 gen(17);
  std::uniform_int_distribution<int> xv(0, 6);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> wv(0.0, 2.0);
  int compared = 0;
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 4 + rep % 20;
    std::vector<double> a(n), x(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = z(gen);
      x[i] = xv(gen);
      w[i] = rep % 2 ? 1.0 : (i % 5 == 0 ? 0.0 : wv(gen));
    }
    const double min_child = rep % 3 == 0 ? 1.0 : 3.0;
    const auto got = best_split_point(a, x, w, min_child, 2);
    const auto want = oracle::best_split(a, x, w, min_child);
    REQUIRE(got.has_value() == want.found);
    if (!got) continue;
    ++compared;
    CHECK(got->covariate_index == 2);
    CHECK(got->standardized_statistic == doctest::Approx(want.statistic).epsilon(1e-9));
    for (std::size_t i = 0; i < n; ++i)
      if (w[i] > 0.0) CHECK((x[i] <= got->threshold) == want.left[i]);
  }
  CHECK(compared > 200);
}

TEST_CASE("split thresholds are midpoints and ties go to the smallest") {
  // Symmetric scores: splitting after 1 or after 3 gives the same statistic.
  std::vector<double> a = {1, -1, -1, 1}, x = {1, 2, 3, 4}, w = {1, 1, 1, 1};
  const auto s = best_split_point(a, x, w, 1.0);
  REQUIRE(s.has_value());
  CHECK(s->threshold == doctest::Approx(1.5));
}
