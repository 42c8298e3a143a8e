#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "churn/dataset.hpp"
#include "churn/model.hpp"
#include "churn/survival.hpp"

namespace churn {

/// Kaplan–Meier of the censoring distribution G (event indicators flipped).
SurvivalCurve censoring_km(std::span<const SurvivalSample> samples);

/// IPCW Brier score at t:
///   (1/n) sum_i [ S_i(t)^2 1{T_i <= t, event_i} / G(T_i-) + (1 - S_i(t))^2 1{T_i > t} / G(t) ].
/// Subjects censored before t contribute 0. Throws EvaluationHorizonError
/// when a needed G value is zero.
double brier_score(std::span<const SurvivalCurve> curves, std::span<const SurvivalSample> samples,
                   double t, const SurvivalCurve& censoring);

/// grid_size equally spaced points on [0, t_max].
std::vector<double> uniform_grid(double t_max, std::size_t grid_size);

/// (1 / (b - a)) * trapezoid integral of values over grid.
double trapezoid_mean(std::span<const double> grid, std::span<const double> values);

struct BrierCurve {
  std::string label;
  std::vector<double> grid;
  std::vector<double> values;
};

BrierCurve brier_curve(std::span<const SurvivalCurve> curves, std::span<const SurvivalSample> samples,
                       const SurvivalCurve& censoring, double t_max, std::size_t grid_size,
                       std::string label = {});

/// Integrated Brier score on [0, t_max], trapezoidal on a uniform grid.
double integrated_brier(std::span<const SurvivalCurve> curves, std::span<const SurvivalSample> samples,
                        const SurvivalCurve& censoring, double t_max, std::size_t grid_size = 100);
/// Same, with G estimated from `samples`.
double integrated_brier(std::span<const SurvivalCurve> curves, std::span<const SurvivalSample> samples,
                        double t_max, std::size_t grid_size = 100);

/// Evaluation horizon: the given quantile of observed event times.
double default_horizon(std::span<const SurvivalSample> samples, double quantile = 0.95);

struct IbsEntry {
  std::string model;
  double ibs = 0.0;  // apparent IBS: fit and score on the full dataset
  double bootstrap_mean = 0.0;
  double bootstrap_sd = 0.0;
  std::size_t replicates = 0;
  std::size_t redraws = 0;
  double t_max = 0.0;
};

struct BootstrapOptions {
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool insample = false;  // score each replicate on its training rows
  double t_max = 0.0;     // 0 selects default_horizon(full data)
  std::size_t grid_size = 100;
};

/// Bootstrap cross-validation: each replicate resamples n rows with
/// replacement, trains, and scores IBS on the out-of-bag rows. Replicate b
/// uses substream (seed, b); replicates with no out-of-bag rows or no
/// training events are redrawn, at most 10 times.
IbsEntry bootstrap_cv(const Dataset& data, const ModelSpec& spec, const BootstrapOptions& options);

/// Deterministic train/test split of row indices.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};
Split holdout_split(std::size_t rows, double test_fraction, std::uint64_t seed);

struct DeviationRow {
  std::string id;
  double observed = 0.0;
  double predicted = 0.0;  // median survival
  double relative_deviation = 0.0;
};

struct DeviationTable {
  std::string label;
  std::vector<DeviationRow> rows;
  std::size_t excluded_unreached = 0;
  std::size_t excluded_censored = 0;
};

/// Rows for churned subjects whose predicted median is reached.
DeviationTable deviation_export(std::span<const SurvivalCurve> curves, const Dataset& data,
                                std::string label = {});

/// Interquartile range (linear-interpolation quantiles).
double interquartile_range(std::vector<double> values);

}  // namespace churn
