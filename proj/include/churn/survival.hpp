#pragma once

#include <optional>
#include <span>
#include <vector>

namespace churn {

/// One subject's response on a chosen time axis (level or playtime seconds).
struct SurvivalSample {
  double time = 0.0;
  bool event = false;  // true = churn observed, false = censored

  friend bool operator==(const SurvivalSample&, const SurvivalSample&) = default;
};

/// Throws InvalidInput unless time is finite and nonnegative.
void validate_sample(const SurvivalSample& sample);

/// Right-continuous step function S(t). S(t) = 1 before the first grid
/// point; probs[k] holds on [grid[k], grid[k+1]).
class SurvivalCurve {
 public:
  SurvivalCurve() = default;
  /// Validates: grid strictly increasing and nonnegative, probs nonincreasing in [0,1].
  SurvivalCurve(std::vector<double> grid, std::vector<double> probs);

  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t size() const { return grid_.size(); }
  bool empty() const { return grid_.empty(); }

  double operator()(double t) const;
  /// Left limit S(t-).
  double left_limit(double t) const;

  friend bool operator==(const SurvivalCurve&, const SurvivalCurve&) = default;

 private:
  std::vector<double> grid_;
  std::vector<double> probs_;
};

/// Right-continuous nondecreasing step function, zero before grid[0].
class CumulativeHazard {
 public:
  CumulativeHazard() = default;
  CumulativeHazard(std::vector<double> grid, std::vector<double> values);

  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return grid_.size(); }

  double operator()(double t) const;

  friend bool operator==(const CumulativeHazard&, const CumulativeHazard&) = default;

 private:
  std::vector<double> grid_;
  std::vector<double> values_;
};

/// Weighted product-limit estimator. Grid holds the distinct times of
/// positive-weight events; at tied times events precede censorings, so a
/// subject censored at t is still at risk at t.
SurvivalCurve kaplan_meier(std::span<const SurvivalSample> samples,
                           std::span<const double> weights);

/// Weighted Nelson–Aalen estimator on the same grid as kaplan_meier.
CumulativeHazard nelson_aalen(std::span<const SurvivalSample> samples,
                              std::span<const double> weights);

/// Smallest grid time with S(t) <= 0.5, or nullopt when the curve never
/// reaches one half.
std::optional<double> median_survival(const SurvivalCurve& curve);

double curve_eval(const SurvivalCurve& curve, double t);

/// Pointwise mean of curves on the union of their grids.
SurvivalCurve average_curves(std::span<const SurvivalCurve> curves);

/// Event counts accumulated over the distinct event times of a sample that
/// has already been sorted by time. Shared by the estimators above and by
/// the forest, which reuses one ordering for every prediction.
struct EventTable {
  std::vector<double> times;    // distinct positive-weight event times
  std::vector<double> events;   // d_k
  std::vector<double> at_risk;  // n_k
};

/// `order` lists sample indices sorted by (time ascending); weights may be
/// zero. Negative weights are a caller bug and are not checked here.
EventTable event_table(std::span<const SurvivalSample> samples,
                       std::span<const double> weights,
                       std::span<const std::size_t> order);

/// Indices of `samples` stably sorted by time.
std::vector<std::size_t> time_order(std::span<const SurvivalSample> samples);

/// Product-limit curve from an event table.
SurvivalCurve km_from_table(const EventTable& table);

}  // namespace churn
