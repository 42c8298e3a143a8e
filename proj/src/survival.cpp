#include "churn/survival.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "churn/error.hpp"

namespace churn {

void validate_sample(const SurvivalSample& sample) {
  if (!std::isfinite(sample.time) || sample.time < 0.0)
    throw InvalidInput("survival time must be finite and nonnegative, got " +
                       std::to_string(sample.time));
}

SurvivalCurve::SurvivalCurve(std::vector<double> grid, std::vector<double> probs)
    : grid_(std::move(grid)), probs_(std::move(probs)) {
  if (grid_.size() != probs_.size())
    throw InvalidInput("survival curve grid and probabilities differ in length");
  for (std::size_t k = 0; k < grid_.size(); ++k) {
    if (!std::isfinite(grid_[k]) || grid_[k] < 0.0)
      throw InvalidInput("survival curve grid must be finite and nonnegative");
    if (k > 0 && !(grid_[k] > grid_[k - 1]))
      throw InvalidInput("survival curve grid must be strictly increasing");
    if (!(probs_[k] >= 0.0 && probs_[k] <= 1.0))
      throw InvalidInput("survival probabilities must lie in [0, 1]");
    if (k > 0 && probs_[k] > probs_[k - 1])
      throw InvalidInput("survival probabilities must be nonincreasing");
  }
}

double SurvivalCurve::operator()(double t) const {
  auto it = std::upper_bound(grid_.begin(), grid_.end(), t);
  if (it == grid_.begin()) return 1.0;
  return probs_[static_cast<std::size_t>(it - grid_.begin()) - 1];
}

double SurvivalCurve::left_limit(double t) const {
  auto it = std::lower_bound(grid_.begin(), grid_.end(), t);
  if (it == grid_.begin()) return 1.0;
  return probs_[static_cast<std::size_t>(it - grid_.begin()) - 1];
}

CumulativeHazard::CumulativeHazard(std::vector<double> grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (grid_.size() != values_.size())
    throw InvalidInput("cumulative hazard grid and values differ in length");
  for (std::size_t k = 0; k < grid_.size(); ++k) {
    if (!std::isfinite(grid_[k]) || grid_[k] < 0.0)
      throw InvalidInput("cumulative hazard grid must be finite and nonnegative");
    if (k > 0 && !(grid_[k] > grid_[k - 1]))
      throw InvalidInput("cumulative hazard grid must be strictly increasing");
    if (!(values_[k] >= 0.0) || !std::isfinite(values_[k]))
      throw InvalidInput("cumulative hazard values must be finite and nonnegative");
    if (k > 0 && values_[k] < values_[k - 1])
      throw InvalidInput("cumulative hazard must be nondecreasing");
  }
}

double CumulativeHazard::operator()(double t) const {
  auto it = std::upper_bound(grid_.begin(), grid_.end(), t);
  if (it == grid_.begin()) return 0.0;
  return values_[static_cast<std::size_t>(it - grid_.begin()) - 1];
}

std::vector<std::size_t> time_order(std::span<const SurvivalSample> samples) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return samples[a].time < samples[b].time;
  });
  return order;
}

EventTable event_table(std::span<const SurvivalSample> samples,
                       std::span<const double> weights,
                       std::span<const std::size_t> order) {
  EventTable table;
  // Walk tied-time groups from the largest time down so the at-risk totals
  // are suffix sums rather than differences.
  std::size_t end = order.size();
  double at_risk = 0.0;
  while (end > 0) {
    const double t = samples[order[end - 1]].time;
    std::size_t begin = end;
    double group = 0.0;
    double deaths = 0.0;
    while (begin > 0 && samples[order[begin - 1]].time == t) {
      --begin;
      const std::size_t i = order[begin];
      group += weights[i];
      if (samples[i].event) deaths += weights[i];
    }
    at_risk += group;
    if (deaths > 0.0) {
      table.times.push_back(t);
      table.events.push_back(deaths);
      table.at_risk.push_back(at_risk);
    }
    end = begin;
  }
  std::reverse(table.times.begin(), table.times.end());
  std::reverse(table.events.begin(), table.events.end());
  std::reverse(table.at_risk.begin(), table.at_risk.end());
  return table;
}

SurvivalCurve km_from_table(const EventTable& table) {
  std::vector<double> probs(table.times.size());
  double s = 1.0;
  for (std::size_t k = 0; k < table.times.size(); ++k) {
    s *= 1.0 - table.events[k] / table.at_risk[k];
    if (s < 0.0) s = 0.0;
    probs[k] = s;
  }
  return SurvivalCurve(table.times, std::move(probs));
}

namespace {

void check_weighted_input(std::span<const SurvivalSample> samples,
                          std::span<const double> weights) {
  if (samples.empty()) throw InvalidInput("survival estimator needs at least one sample");
  if (samples.size() != weights.size())
    throw InvalidInput("samples and weights differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    validate_sample(samples[i]);
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
      throw InvalidInput("weights must be finite and nonnegative");
    total += weights[i];
  }
  if (!(total > 0.0)) throw InvalidInput("total weight must be positive");
}

}  // namespace

SurvivalCurve kaplan_meier(std::span<const SurvivalSample> samples,
                           std::span<const double> weights) {
  check_weighted_input(samples, weights);
  const auto order = time_order(samples);
  return km_from_table(event_table(samples, weights, order));
}

CumulativeHazard nelson_aalen(std::span<const SurvivalSample> samples,
                              std::span<const double> weights) {
  check_weighted_input(samples, weights);
  const auto order = time_order(samples);
  const EventTable table = event_table(samples, weights, order);
  std::vector<double> values(table.times.size());
  double h = 0.0;
  for (std::size_t k = 0; k < table.times.size(); ++k) {
    h += table.events[k] / table.at_risk[k];
    values[k] = h;
  }
  return CumulativeHazard(table.times, std::move(values));
}

std::optional<double> median_survival(const SurvivalCurve& curve) {
  for (std::size_t k = 0; k < curve.size(); ++k)
    if (curve.probs()[k] <= 0.5) return curve.grid()[k];
  return std::nullopt;
}

double curve_eval(const SurvivalCurve& curve, double t) { return curve(t); }

SurvivalCurve average_curves(std::span<const SurvivalCurve> curves) {
  if (curves.empty()) throw InvalidInput("cannot average an empty set of curves");
  std::vector<double> grid;
  for (const auto& c : curves) grid.insert(grid.end(), c.grid().begin(), c.grid().end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  std::vector<double> probs(grid.size(), 0.0);
  for (const auto& c : curves)
    for (std::size_t k = 0; k < grid.size(); ++k) probs[k] += c(grid[k]);
  const double n = static_cast<double>(curves.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    probs[k] = std::clamp(probs[k] / n, 0.0, 1.0);
    if (k > 0) probs[k] = std::min(probs[k], probs[k - 1]);
  }
  return SurvivalCurve(std::move(grid), std::move(probs));
}

}  // namespace churn
