#include "churn/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "churn/error.hpp"
#include "churn/random.hpp"
#include "churn/rank_stats.hpp"

namespace churn {

TreeParams resolve_tree_params(TreeParams params, std::size_t covariate_count) {
  if (covariate_count == 0) throw InvalidInput("tree needs at least one covariate");
  if (!(params.alpha > 0.0 && params.alpha <= 1.0)) throw InvalidInput("alpha must lie in (0, 1]");
  if (!(params.min_node_weight > 0.0)) throw InvalidInput("min_node_weight must be positive");
  if (!(params.min_child_weight > 0.0)) throw InvalidInput("min_child_weight must be positive");
  if (params.min_child_weight > params.min_node_weight)
    throw InvalidInput("min_child_weight must not exceed min_node_weight");
  if (params.mtry == 0)
    params.mtry = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(covariate_count))));
  if (params.mtry > covariate_count)
    throw InvalidInput("mtry (" + std::to_string(params.mtry) + ") exceeds covariate count (" +
                       std::to_string(covariate_count) + ")");
  return params;
}

std::size_t SurvivalTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.covariate < 0; }));
}

std::size_t SurvivalTree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<std::size_t> level(nodes_.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    deepest = std::max(deepest, level[k]);
    if (nodes_[k].covariate >= 0) {
      level[nodes_[k].left] = level[k] + 1;
      level[nodes_[k].right] = level[k] + 1;
    }
  }
  return deepest;
}

std::size_t SurvivalTree::leaf_for(std::span<const double> x) const {
  if (x.size() != covariate_count_)
    throw InvalidInput("covariate vector has " + std::to_string(x.size()) + " entries, tree expects " +
                       std::to_string(covariate_count_));
  std::size_t k = 0;
  while (nodes_[k].covariate >= 0) {
    const Node& n = nodes_[k];
    k = x[static_cast<std::size_t>(n.covariate)] <= n.threshold ? n.left : n.right;
  }
  return k;
}

std::span<const std::uint32_t> SurvivalTree::leaf_rows(std::size_t leaf) const {
  const Node& n = nodes_.at(leaf);
  return std::span<const std::uint32_t>(member_rows_).subspan(n.member_begin, n.member_end - n.member_begin);
}

std::span<const double> SurvivalTree::leaf_weights(std::size_t leaf) const {
  const Node& n = nodes_.at(leaf);
  return std::span<const double>(member_weights_).subspan(n.member_begin, n.member_end - n.member_begin);
}

void SurvivalTree::serialize(ByteWriter& out) const {
  out.u64(training_rows_);
  out.u64(covariate_count_);
  out.u64(nodes_.size());
  for (const Node& n : nodes_) {
    if (n.covariate >= 0) {
      out.u8(1);
      out.u32(static_cast<std::uint32_t>(n.covariate));
      out.f64(n.threshold);
      out.u32(n.left);
      out.u32(n.right);
    } else {
      out.u8(0);
      out.u32(n.member_end - n.member_begin);
      for (std::uint32_t m = n.member_begin; m < n.member_end; ++m) {
        out.u32(member_rows_[m]);
        out.f64(member_weights_[m]);
      }
    }
  }
}

SurvivalTree SurvivalTree::deserialize(ByteReader& in) {
  SurvivalTree tree;
  tree.training_rows_ = in.u64();
  tree.covariate_count_ = in.u64();
  const std::uint64_t count = in.u64();
  if (count == 0) throw CorruptModel("tree without nodes");
  tree.nodes_.resize(count);
  for (auto& n : tree.nodes_) {
    const std::uint8_t tag = in.u8();
    if (tag == 1) {
      n.covariate = static_cast<std::int32_t>(in.u32());
      n.threshold = in.f64();
      n.left = in.u32();
      n.right = in.u32();
      if (n.left >= count || n.right >= count ||
          static_cast<std::size_t>(n.covariate) >= tree.covariate_count_)
        throw CorruptModel("tree node references are out of range");
    } else if (tag == 0) {
      const std::uint32_t members = in.u32();
      n.member_begin = static_cast<std::uint32_t>(tree.member_rows_.size());
      for (std::uint32_t m = 0; m < members; ++m) {
        const std::uint32_t row = in.u32();
        if (row >= tree.training_rows_) throw CorruptModel("leaf member row out of range");
        tree.member_rows_.push_back(row);
        tree.member_weights_.push_back(in.f64());
      }
      n.member_end = static_cast<std::uint32_t>(tree.member_rows_.size());
    } else {
      throw CorruptModel("unknown tree node tag");
    }
  }
  return tree;
}

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, std::span<const double> weights, const TreeParams& params)
      : data_(data), weights_(weights), params_(params) {}

  SurvivalTree build(std::uint64_t seed) {
    tree_.training_rows_ = data_.rows();
    tree_.covariate_count_ = data_.cols();
    std::vector<std::size_t> members;
    for (std::size_t i : time_order(data_.responses()))
      if (weights_[i] > 0.0) members.push_back(i);
    if (members.empty()) throw InvalidInput("tree needs at least one positive-weight sample");
    grow(members, mix64(seed));
    return std::move(tree_);
  }

 private:
  // `members` is sorted by survival time; children inherit that order.
  std::uint32_t grow(const std::vector<std::size_t>& members, std::uint64_t key) {
    const auto id = static_cast<std::uint32_t>(tree_.nodes_.size());
    tree_.nodes_.emplace_back();

    const auto split = choose_split(members, key);
    if (!split) {
      auto& node = tree_.nodes_[id];
      node.member_begin = static_cast<std::uint32_t>(tree_.member_rows_.size());
      for (std::size_t i : members) {
        tree_.member_rows_.push_back(static_cast<std::uint32_t>(i));
        tree_.member_weights_.push_back(weights_[i]);
      }
      node.member_end = static_cast<std::uint32_t>(tree_.member_rows_.size());
      return id;
    }

    std::vector<std::size_t> left, right;
    const auto column = data_.column(split->covariate_index);
    for (std::size_t i : members) (column[i] <= split->threshold ? left : right).push_back(i);

    const std::uint32_t l = grow(left, hash_combine(key, 1));
    const std::uint32_t r = grow(right, hash_combine(key, 2));
    auto& node = tree_.nodes_[id];
    node.covariate = static_cast<std::int32_t>(split->covariate_index);
    node.threshold = split->threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  std::optional<SplitPoint> choose_split(const std::vector<std::size_t>& members, std::uint64_t key) {
    const std::size_t m = members.size();
    double total = 0.0;
    std::size_t events = 0;
    std::vector<SurvivalSample> samples(m);
    std::vector<double> w(m);
    for (std::size_t k = 0; k < m; ++k) {
      samples[k] = data_.responses()[members[k]];
      w[k] = weights_[members[k]];
      total += w[k];
      if (samples[k].event) ++events;
    }
    if (total < params_.min_node_weight || events < 2) return std::nullopt;

    const auto scores = node_scores(samples, w);

    // Draw mtry covariates without replacement, then test them in index order.
    Rng rng(key);
    std::vector<std::size_t> candidates(data_.cols());
    std::iota(candidates.begin(), candidates.end(), std::size_t{0});
    for (std::size_t k = 0; k < params_.mtry; ++k) {
      const std::size_t j = k + rng.below(candidates.size() - k);
      std::swap(candidates[k], candidates[j]);
    }
    candidates.resize(params_.mtry);
    std::sort(candidates.begin(), candidates.end());

    std::vector<double> x(m);
    std::optional<VariableTest> best;
    for (std::size_t j : candidates) {
      const auto column = data_.column(j);
      for (std::size_t k = 0; k < m; ++k) x[k] = column[members[k]];
      const VariableTest test = variable_test(scores, x, w, j);
      if (test.statistic > 0.0 && (!best || test.statistic > best->statistic)) best = test;
    }
    if (!best) return std::nullopt;
    double p = best->p_value;
    if (params_.bonferroni) p = std::min(1.0, p * static_cast<double>(candidates.size()));
    if (p > params_.alpha) return std::nullopt;

    const auto column = data_.column(best->covariate_index);
    for (std::size_t k = 0; k < m; ++k) x[k] = column[members[k]];
    return best_split_point(scores, x, w, params_.min_child_weight, best->covariate_index);
  }

  // Log-rank scores for samples already sorted by time.
  static std::vector<double> node_scores(const std::vector<SurvivalSample>& samples,
                                         const std::vector<double>& w) {
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const EventTable table = event_table(samples, w, order);
    std::vector<double> scores(samples.size());
    double hazard = 0.0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      while (k < table.times.size() && table.times[k] <= samples[i].time) {
        hazard += table.events[k] / table.at_risk[k];
        ++k;
      }
      scores[i] = (samples[i].event ? 1.0 : 0.0) - hazard;
    }
    return scores;
  }

  const Dataset& data_;
  std::span<const double> weights_;
  TreeParams params_;
  SurvivalTree tree_;
};

SurvivalTree grow_tree(const Dataset& data, std::span<const double> row_weights,
                       const TreeParams& params, std::uint64_t rng_seed) {
  if (data.rows() == 0) throw InvalidInput("cannot grow a tree on an empty dataset");
  if (row_weights.size() != data.rows()) throw InvalidInput("row weights differ in length from dataset");
  for (double w : row_weights)
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidInput("row weights must be finite and nonnegative");
  const TreeParams resolved = resolve_tree_params(params, data.cols());
  return TreeBuilder(data, row_weights, resolved).build(rng_seed);
}

std::vector<double> tree_predict_weights(const SurvivalTree& tree, std::span<const double> x) {
  const std::size_t leaf = tree.leaf_for(x);
  std::vector<double> out(tree.training_rows(), 0.0);
  const auto rows = tree.leaf_rows(leaf);
  const auto weights = tree.leaf_weights(leaf);
  for (std::size_t k = 0; k < rows.size(); ++k) out[rows[k]] = weights[k];
  return out;
}

SurvivalCurve tree_predict_curve(const SurvivalTree& tree, std::span<const SurvivalSample> training,
                                 std::span<const double> x) {
  if (training.size() != tree.training_rows())
    throw InvalidInput("training responses do not match the tree");
  const auto w = tree_predict_weights(tree, x);
  return kaplan_meier(training, w);
}

}  // namespace churn
