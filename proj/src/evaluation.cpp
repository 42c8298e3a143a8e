#include "churn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "churn/error.hpp"
#include "churn/parallel.hpp"
#include "churn/random.hpp"

namespace churn {

SurvivalCurve censoring_km(std::span<const SurvivalSample> samples) {
  std::vector<SurvivalSample> flipped(samples.begin(), samples.end());
  for (auto& s : flipped) s.event = !s.event;
  std::vector<double> w(flipped.size(), 1.0);
  return kaplan_meier(flipped, w);
}

double brier_score(std::span<const SurvivalCurve> curves, std::span<const SurvivalSample> samples,
                   double t, const SurvivalCurve& censoring) {
  if (curves.size() != samples.size()) throw InvalidInput("need exactly one curve per subject");
  if (samples.empty()) throw InvalidInput("Brier score needs at least one subject");
  const double g_t = censoring(t);
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double s = curves[i](t);
    if (samples[i].time <= t) {
      if (!samples[i].event) continue;
      const double g = censoring.left_limit(samples[i].time);
      if (!(g > 0.0))
        throw EvaluationHorizonError("censoring survivor function is zero before time " +
                                     std::to_string(samples[i].time));
      sum += s * s / g;
    } else {
      if (!(g_t > 0.0))
        throw EvaluationHorizonError("censoring survivor function is zero at t = " + std::to_string(t) +
                                     "; lower the evaluation horizon");
      sum += (1.0 - s) * (1.0 - s) / g_t;
    }
  }
  return sum / static_cast<double>(samples.size());
}

std::vector<double> uniform_grid(double t_max, std::size_t grid_size) {
  if (!(t_max > 0.0) || !std::isfinite(t_max)) throw InvalidInput("evaluation horizon must be positive");
  if (grid_size < 2) throw InvalidInput("integration grid needs at least two points");
  std::vector<double> grid(grid_size);
  for (std::size_t j = 0; j < grid_size; ++j)
    grid[j] = t_max * static_cast<double>(j) / static_cast<double>(grid_size - 1);
  grid.back() = t_max;
  return grid;
}

double trapezoid_mean(std::span<const double> grid, std::span<const double> values) {
  if (grid.size() != values.size() || grid.size() < 2)
    throw InvalidInput("trapezoid rule needs matching grids of at least two points");
  double area = 0.0;
  for (std::size_t j = 1; j < grid.size(); ++j)
    area += 0.5 * (values[j] + values[j - 1]) * (grid[j] - grid[j - 1]);
  return area / (grid.back() - grid.front());
}

BrierCurve brier_curve(std::span<const SurvivalCurve> curves, std::span<const SurvivalSample> samples,
                       const SurvivalCurve& censoring, double t_max, std::size_t grid_size,
                       std::string label) {
  BrierCurve out;
  out.label = std::move(label);
  out.grid = uniform_grid(t_max, grid_size);
  out.values.reserve(grid_size);
  for (double t : out.grid) out.values.push_back(brier_score(curves, samples, t, censoring));
  return out;
}

double integrated_brier(std::span<const SurvivalCurve> curves, std::span<const SurvivalSample> samples,
                        const SurvivalCurve& censoring, double t_max, std::size_t grid_size) {
  const BrierCurve bc = brier_curve(curves, samples, censoring, t_max, grid_size);
  return trapezoid_mean(bc.grid, bc.values);
}

double integrated_brier(std::span<const SurvivalCurve> curves, std::span<const SurvivalSample> samples,
                        double t_max, std::size_t grid_size) {
  return integrated_brier(curves, samples, censoring_km(samples), t_max, grid_size);
}

double default_horizon(std::span<const SurvivalSample> samples, double quantile) {
  std::vector<double> times;
  for (const auto& s : samples)
    if (s.event) times.push_back(s.time);
  if (times.empty()) throw InvalidInput("evaluation horizon needs at least one observed event");
  std::sort(times.begin(), times.end());
  const auto rank = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(times.size())));
  return times[std::clamp<std::size_t>(rank, 1, times.size()) - 1];
}

namespace {

struct Replicate {
  double ibs = 0.0;
  std::size_t redraws = 0;
};

Replicate run_replicate(const Dataset& data, const ModelSpec& spec, const BootstrapOptions& options,
                        const SurvivalCurve& censoring, double t_max, std::size_t b) {
  const std::size_t n = data.rows();
  Rng rng(hash_combine(options.seed, b));
  std::vector<std::size_t> train;
  std::vector<std::size_t> oob;
  Replicate rep;
  for (;;) {
    train.clear();
    oob.clear();
    std::vector<char> drawn(n, 0);
    bool has_event = false;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = rng.below(n);
      train.push_back(i);
      drawn[i] = 1;
      has_event |= data.responses()[i].event;
    }
    for (std::size_t i = 0; i < n; ++i)
      if (!drawn[i]) oob.push_back(i);
    if (has_event && (options.insample || !oob.empty())) break;
    if (++rep.redraws > 10)
      throw NumericFailure("bootstrap replicate " + std::to_string(b) + " needed more than 10 redraws");
  }
  const Dataset train_set = data.subset(train);
  const Dataset eval_set = options.insample ? train_set : data.subset(oob);
  ModelSpec inner = spec;
  inner.workers = 1;
  SurvivalModel model;
  try {
    model = fit_model(inner, train_set);
  } catch (const NumericFailure& e) {
    throw NumericFailure("bootstrap replicate " + std::to_string(b) + ": " + e.what());
  }
  const auto curves = predict_curves(model, eval_set, 1, spec.aggregation);
  rep.ibs = integrated_brier(curves, eval_set.responses(), censoring, t_max, options.grid_size);
  return rep;
}

}  // namespace

IbsEntry bootstrap_cv(const Dataset& data, const ModelSpec& spec, const BootstrapOptions& options) {
  if (options.replicates < 1) throw InvalidInput("bootstrap needs at least one replicate");
  if (data.rows() < 2) throw InvalidInput("bootstrap needs at least two rows");
  IbsEntry entry;
  entry.model = model_type_name(spec.type);
  entry.replicates = options.replicates;
  const SurvivalCurve censoring = censoring_km(data.responses());
  entry.t_max = options.t_max > 0.0 ? options.t_max : default_horizon(data.responses());

  const SurvivalModel full = fit_model(spec, data);
  const auto full_curves = predict_curves(full, data, spec.workers, spec.aggregation);
  entry.ibs = integrated_brier(full_curves, data.responses(), censoring, entry.t_max, options.grid_size);

  std::vector<Replicate> reps(options.replicates);
  parallel_for(options.replicates, options.workers, [&](std::size_t b) {
    reps[b] = run_replicate(data, spec, options, censoring, entry.t_max, b);
  });
  double sum = 0.0;
  for (const auto& r : reps) {
    sum += r.ibs;
    entry.redraws += r.redraws;
  }
  entry.bootstrap_mean = sum / static_cast<double>(reps.size());
  double ss = 0.0;
  for (const auto& r : reps) ss += (r.ibs - entry.bootstrap_mean) * (r.ibs - entry.bootstrap_mean);
  entry.bootstrap_sd = reps.size() > 1 ? std::sqrt(ss / static_cast<double>(reps.size() - 1)) : 0.0;
  return entry;
}

Split holdout_split(std::size_t rows, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InvalidInput("test fraction must lie in (0, 1)");
  std::vector<std::size_t> idx(rows);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(hash_combine(seed, hash_tag("holdout")));
  rng.shuffle(std::span<std::size_t>(idx));
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(rows)));
  if (n_test == 0 || n_test >= rows) throw InvalidInput("holdout split leaves an empty side");
  Split s;
  s.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

DeviationTable deviation_export(std::span<const SurvivalCurve> curves, const Dataset& data, std::string label) {
  if (curves.size() != data.rows()) throw InvalidInput("need exactly one curve per subject");
  DeviationTable table;
  table.label = std::move(label);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const auto& s = data.responses()[i];
    if (!s.event || !(s.time > 0.0)) {
      ++table.excluded_censored;
      continue;
    }
    const auto median = median_survival(curves[i]);
    if (!median) {
      ++table.excluded_unreached;
      continue;
    }
    table.rows.push_back({data.ids()[i], s.time, *median, (*median - s.time) / s.time});
  }
  return table;
}

double interquartile_range(std::vector<double> values) {
  if (values.empty()) throw InvalidInput("interquartile range of an empty set");
  std::sort(values.begin(), values.end());
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return q(0.75) - q(0.25);
}

}  // namespace churn
