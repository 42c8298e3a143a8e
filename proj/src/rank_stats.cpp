#include "churn/rank_stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "churn/error.hpp"

namespace churn {

std::vector<double> logrank_scores(std::span<const SurvivalSample> samples,
                                   std::span<const double> weights) {
  const CumulativeHazard hazard = nelson_aalen(samples, weights);
  if (hazard.size() == 0) throw DegenerateNode("log-rank scores need at least one event");
  std::vector<double> scores(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    scores[i] = (samples[i].event ? 1.0 : 0.0) - hazard(samples[i].time);
  return scores;
}

namespace {

void check_lengths(std::span<const double> scores, std::span<const double> covariate,
                   std::span<const double> weights) {
  if (scores.size() != covariate.size() || scores.size() != weights.size())
    throw InvalidInput("scores, covariate and weights must have equal length");
}

}  // namespace

double linear_statistic(std::span<const double> scores, std::span<const double> covariate,
                        std::span<const double> weights) {
  check_lengths(scores, covariate, weights);
  double t = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) t += weights[i] * covariate[i] * scores[i];
  return t;
}

std::optional<Moments> conditional_moments(std::span<const double> scores,
                                           std::span<const double> covariate,
                                           std::span<const double> weights) {
  check_lengths(scores, covariate, weights);
  double w_total = 0.0, wa = 0.0, wh = 0.0;
  bool h_varies = false, a_varies = false;
  double h_first = 0.0, a_first = 0.0;
  bool seen = false;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    w_total += weights[i];
    wa += weights[i] * scores[i];
    wh += weights[i] * covariate[i];
    if (!seen) {
      h_first = covariate[i];
      a_first = scores[i];
      seen = true;
    } else {
      h_varies |= covariate[i] != h_first;
      a_varies |= scores[i] != a_first;
    }
  }
  if (!(w_total > 1.0) || !h_varies || !a_varies) return std::nullopt;
  const double a_mean = wa / w_total;
  const double h_mean = wh / w_total;
  double ss_a = 0.0, ss_h = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    ss_a += weights[i] * (scores[i] - a_mean) * (scores[i] - a_mean);
    ss_h += weights[i] * (covariate[i] - h_mean) * (covariate[i] - h_mean);
  }
  const double var_a = ss_a / w_total;
  Moments m;
  m.mu = wh * a_mean;
  m.sigma2 = w_total / (w_total - 1.0) * var_a * ss_h;
  if (!(m.sigma2 > 0.0) || !std::isfinite(m.sigma2)) return std::nullopt;
  return m;
}

double normal_two_sided_p(double c) { return std::erfc(std::fabs(c) / std::sqrt(2.0)); }

VariableTest variable_test(std::span<const double> scores, std::span<const double> covariate,
                           std::span<const double> weights, std::size_t covariate_index) {
  VariableTest result;
  result.covariate_index = covariate_index;
  const auto moments = conditional_moments(scores, covariate, weights);
  if (!moments) return result;
  const double t = linear_statistic(scores, covariate, weights);
  result.statistic = std::fabs(t - moments->mu) / std::sqrt(moments->sigma2);
  result.p_value = std::clamp(normal_two_sided_p(result.statistic), 0.0, 1.0);
  return result;
}

std::optional<SplitPoint> best_split_point(std::span<const double> scores,
                                           std::span<const double> covariate,
                                           std::span<const double> weights,
                                           double min_child_weight,
                                           std::size_t covariate_index) {
  check_lengths(scores, covariate, weights);
  std::vector<std::size_t> order;
  order.reserve(scores.size());
  double w_total = 0.0, wa = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    order.push_back(i);
    w_total += weights[i];
    wa += weights[i] * scores[i];
  }
  if (order.size() < 2 || !(w_total > 1.0)) return std::nullopt;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return covariate[a] < covariate[b]; });
  const double a_mean = wa / w_total;
  double ss_a = 0.0;
  for (std::size_t i : order) ss_a += weights[i] * (scores[i] - a_mean) * (scores[i] - a_mean);
  const double var_a = ss_a / w_total;
  if (!(var_a > 0.0)) return std::nullopt;

  std::optional<SplitPoint> best;
  double w_left = 0.0, t_left = 0.0;
  for (std::size_t k = 0; k + 1 < order.size(); ++k) {
    const std::size_t i = order[k];
    w_left += weights[i];
    t_left += weights[i] * scores[i];
    const double lo = covariate[i];
    const double hi = covariate[order[k + 1]];
    if (!(hi > lo)) continue;
    const double w_right = w_total - w_left;
    if (w_left < min_child_weight || w_right < min_child_weight) continue;
    const double sigma2 = var_a * w_left * w_right / (w_total - 1.0);
    if (!(sigma2 > 0.0)) continue;
    const double stat = std::fabs(t_left - w_left * a_mean) / std::sqrt(sigma2);
    if (!best || stat > best->standardized_statistic) {
      double mid = lo + (hi - lo) / 2.0;
      if (!(mid < hi)) mid = lo;
      best = SplitPoint{covariate_index, mid, stat};
    }
  }
  return best;
}

}  // namespace churn
