#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "churn/evaluation.hpp"
#include "churn/features.hpp"
#include "churn/forest.hpp"
#include "churn/model.hpp"
#include "churn/simulate.hpp"

namespace churn::cli {

namespace fs = std::filesystem;

/// Process exit codes.
enum ExitCode : int { kOk = 0, kInvalidInput = 2, kNumericFailure = 3, kIoFailure = 4 };

/// Maps the current exception (call inside a catch block) to an exit code.
int exit_code_for_current_exception();

/// Written as the first line of every CSV output.
std::string fingerprint_line(const std::string& subcommand, const std::string& resolved_config);

struct SimulateOptions {
  SimulationConfig config;
  fs::path out;
  std::size_t workers = 1;
  std::string resolved_config;
};
void run_simulate(const SimulateOptions& options);

struct FeaturizeOptions {
  fs::path logs;
  std::optional<std::string> end_date;  // YYYY-MM-DD; default = latest event day
  double revenue_share = 0.5;
  std::size_t workers = 1;
  fs::path out;
  std::string resolved_config;
};
FeaturizeSummary run_featurize(const FeaturizeOptions& options);

/// Half-open tree index range parsed from "a..b".
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};
IndexRange parse_index_range(const std::string& text);

struct TrainOptions {
  fs::path data;
  ModelType model = ModelType::forest;
  ForestParams forest;
  std::size_t workers = 1;
  std::optional<IndexRange> partial;
  fs::path out;
};
/// Returns a human-readable training summary.
std::string run_train(const TrainOptions& options);

void run_merge(const std::vector<fs::path>& partials, const fs::path& out);

struct PredictOptions {
  fs::path model;
  fs::path players;
  fs::path out;
  std::size_t workers = 1;
  Aggregation aggregation = Aggregation::weights;
  std::string resolved_config;
};
void run_predict(const PredictOptions& options);

struct EvaluateOptions {
  std::optional<fs::path> level_data;
  std::optional<fs::path> playtime_data;
  std::vector<ModelType> models = {ModelType::forest, ModelType::cox, ModelType::km};
  ForestParams forest;
  Aggregation aggregation = Aggregation::weights;
  std::size_t bootstrap = 0;  // 0 = single holdout split
  double test_fraction = 0.3;
  bool insample = false;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  double horizon_quantile = 0.95;
  std::size_t grid_size = 100;
  fs::path out;
  std::string resolved_config;
};

struct EvaluationRow {
  Outcome outcome;
  IbsEntry entry;
  double headline = 0.0;  // value shown in the comparison table
  std::string protocol;
  double deviation_iqr = 0.0;
};

std::vector<EvaluationRow> run_evaluate(const EvaluateOptions& options);

}  // namespace churn::cli
