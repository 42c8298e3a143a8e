#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "churn/survival.hpp"

namespace churn {

/// Log-rank scores a_i = event_i - Lambda(time_i), with Lambda the weighted
/// Nelson–Aalen estimate of the same sample. Throws DegenerateNode when no
/// positive-weight event is present.
std::vector<double> logrank_scores(std::span<const SurvivalSample> samples,
                                   std::span<const double> weights);

/// T = sum_i w_i * h_i * a_i.
double linear_statistic(std::span<const double> scores, std::span<const double> covariate,
                        std::span<const double> weights);

/// Mean and variance of T under the permutation null hypothesis.
struct Moments {
  double mu = 0.0;
  double sigma2 = 0.0;
};

/// nullopt signals a degenerate covariate (constant h or constant scores,
/// or total weight <= 1); such covariates are excluded from selection.
std::optional<Moments> conditional_moments(std::span<const double> scores,
                                           std::span<const double> covariate,
                                           std::span<const double> weights);

struct VariableTest {
  std::size_t covariate_index = 0;
  double statistic = 0.0;  // |T - mu| / sqrt(sigma2)
  double p_value = 1.0;    // two-sided normal tail
};

/// Degenerate covariates are reported with statistic 0 and p_value 1.
VariableTest variable_test(std::span<const double> scores, std::span<const double> covariate,
                           std::span<const double> weights, std::size_t covariate_index = 0);

/// Two-sided standard normal tail probability 2 * (1 - Phi(|c|)).
double normal_two_sided_p(double c);

struct SplitPoint {
  std::size_t covariate_index = 0;
  double threshold = 0.0;  // x <= threshold goes left
  double standardized_statistic = 0.0;
};

/// Exhaustive search over thresholds between adjacent distinct covariate
/// values (among positive-weight samples), maximizing the standardized
/// two-sample statistic of the left group. Both children need weight at
/// least min_child_weight. Ties go to the smallest threshold.
std::optional<SplitPoint> best_split_point(std::span<const double> scores,
                                           std::span<const double> covariate,
                                           std::span<const double> weights,
                                           double min_child_weight,
                                           std::size_t covariate_index = 0);

}  // namespace churn
