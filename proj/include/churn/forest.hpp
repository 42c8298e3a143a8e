#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "churn/dataset.hpp"
#include "churn/tree.hpp"

namespace churn {

inline TreeParams forest_tree_defaults() {
  TreeParams p;
  p.alpha = 1.0;
  return p;
}

struct ForestParams {
  std::size_t n_trees = 1500;
  // Trees inside an ensemble grow without the significance stop (alpha = 1);
  // a standalone tree keeps alpha = 0.05.
  TreeParams tree = forest_tree_defaults();
  double subsample_fraction = 0.632;  // rows drawn without replacement per tree
  std::uint64_t master_seed = 0;

  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

/// How per-tree information is combined into one curve.
enum class Aggregation {
  weights,  // pool leaf weights across trees, then one weighted Kaplan–Meier
  curves,   // average per-tree Kaplan–Meier curves on the union grid
};

/// Fitted ensemble. Tree k sits at position k. Training responses are kept
/// because prediction is a weighted Kaplan–Meier over them.
class SurvivalForest {
 public:
  SurvivalForest() = default;
  SurvivalForest(ForestParams params, std::vector<std::string> schema,
                 std::vector<SurvivalSample> responses, std::vector<SurvivalTree> trees);

  const ForestParams& params() const { return params_; }
  const std::vector<std::string>& schema() const { return schema_; }
  const std::vector<SurvivalSample>& responses() const { return responses_; }
  const std::vector<SurvivalTree>& trees() const { return trees_; }
  std::size_t size() const { return trees_.size(); }

  /// Sum over trees of the reached leaf's member weights.
  std::vector<double> aggregate_weights(std::span<const double> x) const;

  SurvivalCurve predict_curve(std::span<const double> x,
                              Aggregation aggregation = Aggregation::weights) const;

  std::vector<std::uint8_t> serialize() const;
  static SurvivalForest deserialize(std::span<const std::uint8_t> payload);

 private:
  void check_arity(std::span<const double> x) const;

  ForestParams params_;
  std::vector<std::string> schema_;
  std::vector<SurvivalSample> responses_;
  std::vector<SurvivalTree> trees_;
  std::vector<std::size_t> order_;  // training rows sorted by time
};

/// Trees for the half-open global index range [begin, end).
struct PartialModel {
  ForestParams params;
  std::vector<std::string> schema;
  std::vector<SurvivalSample> responses;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::vector<std::size_t> indices;
  std::vector<SurvivalTree> trees;

  std::vector<std::uint8_t> serialize() const;
  static PartialModel deserialize(std::span<const std::uint8_t> payload);
};

/// Seeds of tree k, shared by full and partial training.
std::uint64_t subsample_seed(std::uint64_t master_seed, std::size_t tree_index);
std::uint64_t grow_seed(std::uint64_t master_seed, std::size_t tree_index);

/// Unit row weights on a without-replacement subsample of tree k.
std::vector<double> tree_row_weights(std::size_t rows, const ForestParams& params,
                                     std::size_t tree_index);

SurvivalForest train_forest(const Dataset& data, const ForestParams& params, std::size_t workers);

PartialModel train_partial(const Dataset& data, const ForestParams& params, std::size_t begin,
                           std::size_t end, std::size_t workers = 1);

/// Order of `partials` does not matter. Throws InvalidInput naming the
/// first missing or duplicated tree index, or on mismatched params/schema.
SurvivalForest merge_partials(std::span<const PartialModel> partials);

SurvivalCurve forest_predict_curve(const SurvivalForest& forest, std::span<const double> x,
                                   Aggregation aggregation = Aggregation::weights);

/// Curves in input order, bit-identical for any worker count. Schema
/// mismatches are reported with the offending player index.
std::vector<SurvivalCurve> predict_batch(const SurvivalForest& forest,
                                         std::span<const std::vector<double>> players,
                                         std::size_t workers,
                                         Aggregation aggregation = Aggregation::weights);

void save_model(const SurvivalForest& forest, const std::filesystem::path& path);
SurvivalForest load_model(const std::filesystem::path& path);
void save_partial(const PartialModel& partial, const std::filesystem::path& path);
PartialModel load_partial(const std::filesystem::path& path);

void write_forest_params(ByteWriter& out, const ForestParams& params);
ForestParams read_forest_params(ByteReader& in);

}  // namespace churn
