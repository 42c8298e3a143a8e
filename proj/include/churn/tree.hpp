#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "churn/dataset.hpp"
#include "churn/serialize.hpp"
#include "churn/survival.hpp"

namespace churn {

/// Hyperparameters of a single conditional inference survival tree.
struct TreeParams {
  double alpha = 0.05;            // stop when the smallest p-value exceeds this
  double min_node_weight = 20.0;  // minimum node weight to attempt a split
  double min_child_weight = 7.0;  // minimum weight of each child
  std::size_t mtry = 0;           // covariates drawn per node; 0 = ceil(sqrt(p))
  bool bonferroni = false;        // multiply p-values by the number tested

  friend bool operator==(const TreeParams&, const TreeParams&) = default;
};

/// Checks ranges and returns a copy with mtry resolved for p covariates.
TreeParams resolve_tree_params(TreeParams params, std::size_t covariate_count);

/// A fitted tree. Nodes are stored in preorder; leaves keep the
/// (training row, weight) pairs of their positive-weight members.
class SurvivalTree {
 public:
  struct Node {
    std::int32_t covariate = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t member_begin = 0;  // leaf member range
    std::uint32_t member_end = 0;

    friend bool operator==(const Node&, const Node&) = default;
  };

  std::size_t training_rows() const { return training_rows_; }
  std::size_t covariate_count() const { return covariate_count_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t leaf_count() const;
  std::size_t depth() const;

  /// Index of the leaf reached by x (x <= threshold goes left).
  std::size_t leaf_for(std::span<const double> x) const;
  std::span<const std::uint32_t> leaf_rows(std::size_t leaf) const;
  std::span<const double> leaf_weights(std::size_t leaf) const;

  void serialize(ByteWriter& out) const;
  static SurvivalTree deserialize(ByteReader& in);

  friend bool operator==(const SurvivalTree&, const SurvivalTree&) = default;

 private:
  friend class TreeBuilder;
  std::size_t training_rows_ = 0;
  std::size_t covariate_count_ = 0;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> member_rows_;
  std::vector<double> member_weights_;
};

/// Two-step recursive partitioning: select the covariate with the strongest
/// log-rank association, stop when it is not significant at alpha, then
/// pick the best two-sample split point on it. Node covariate draws use a
/// substream keyed by (rng_seed, node path) so structure does not depend
/// on evaluation order.
SurvivalTree grow_tree(const Dataset& data, std::span<const double> row_weights,
                       const TreeParams& params, std::uint64_t rng_seed);

/// Dense per-training-row weights of the leaf reached by x.
std::vector<double> tree_predict_weights(const SurvivalTree& tree, std::span<const double> x);

/// Weighted Kaplan–Meier of the training responses with the leaf weights of x.
SurvivalCurve tree_predict_curve(const SurvivalTree& tree,
                                 std::span<const SurvivalSample> training,
                                 std::span<const double> x);

}  // namespace churn
