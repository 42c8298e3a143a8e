#include "churn/forest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "churn/error.hpp"
#include "churn/parallel.hpp"
#include "churn/random.hpp"

namespace churn {

SurvivalForest::SurvivalForest(ForestParams params, std::vector<std::string> schema,
                               std::vector<SurvivalSample> responses, std::vector<SurvivalTree> trees)
    : params_(std::move(params)),
      schema_(std::move(schema)),
      responses_(std::move(responses)),
      trees_(std::move(trees)) {
  for (const auto& t : trees_) {
    if (t.training_rows() != responses_.size())
      throw InvalidInput("tree was trained on a different number of rows");
    if (t.covariate_count() != schema_.size())
      throw InvalidInput("tree covariate count differs from forest schema");
  }
  order_ = time_order(responses_);
}

void SurvivalForest::check_arity(std::span<const double> x) const {
  if (x.size() != schema_.size())
    throw InvalidInput("covariate vector has " + std::to_string(x.size()) +
                       " entries, model schema has " + std::to_string(schema_.size()));
}

std::vector<double> SurvivalForest::aggregate_weights(std::span<const double> x) const {
  check_arity(x);
  std::vector<double> w(responses_.size(), 0.0);
  for (const auto& tree : trees_) {
    const std::size_t leaf = tree.leaf_for(x);
    const auto rows = tree.leaf_rows(leaf);
    const auto weights = tree.leaf_weights(leaf);
    for (std::size_t k = 0; k < rows.size(); ++k) w[rows[k]] += weights[k];
  }
  return w;
}

SurvivalCurve SurvivalForest::predict_curve(std::span<const double> x, Aggregation aggregation) const {
  if (trees_.empty()) throw InvalidInput("forest has no trees");
  if (aggregation == Aggregation::curves) {
    check_arity(x);
    std::vector<SurvivalCurve> curves;
    curves.reserve(trees_.size());
    for (const auto& tree : trees_) curves.push_back(tree_predict_curve(tree, responses_, x));
    return average_curves(curves);
  }
  const auto w = aggregate_weights(x);
  return km_from_table(event_table(responses_, w, order_));
}

void write_forest_params(ByteWriter& out, const ForestParams& p) {
  out.u64(p.n_trees);
  out.f64(p.tree.alpha);
  out.f64(p.tree.min_node_weight);
  out.f64(p.tree.min_child_weight);
  out.u64(p.tree.mtry);
  out.u8(p.tree.bonferroni ? 1 : 0);
  out.f64(p.subsample_fraction);
  out.u64(p.master_seed);
}

ForestParams read_forest_params(ByteReader& in) {
  ForestParams p;
  p.n_trees = in.u64();
  p.tree.alpha = in.f64();
  p.tree.min_node_weight = in.f64();
  p.tree.min_child_weight = in.f64();
  p.tree.mtry = in.u64();
  p.tree.bonferroni = in.u8() != 0;
  p.subsample_fraction = in.f64();
  p.master_seed = in.u64();
  return p;
}

namespace {

void write_schema_and_responses(ByteWriter& out, const std::vector<std::string>& schema,
                                const std::vector<SurvivalSample>& responses) {
  out.u64(schema.size());
  for (const auto& name : schema) out.str(name);
  out.u64(responses.size());
  for (const auto& s : responses) {
    out.f64(s.time);
    out.u8(s.event ? 1 : 0);
  }
}

void read_schema_and_responses(ByteReader& in, std::vector<std::string>& schema,
                               std::vector<SurvivalSample>& responses) {
  schema.resize(in.u64());
  for (auto& name : schema) name = in.str();
  responses.resize(in.u64());
  for (auto& s : responses) {
    s.time = in.f64();
    s.event = in.u8() != 0;
  }
}

void validate_forest_params(const ForestParams& params, std::size_t covariates) {
  if (params.n_trees < 1) throw InvalidInput("n_trees must be at least 1");
  if (!(params.subsample_fraction > 0.0 && params.subsample_fraction <= 1.0))
    throw InvalidInput("subsample_fraction must lie in (0, 1]");
  resolve_tree_params(params.tree, covariates);
}

SurvivalTree train_one(const Dataset& data, const ForestParams& params, std::size_t k) {
  const auto w = tree_row_weights(data.rows(), params, k);
  return grow_tree(data, w, params.tree, grow_seed(params.master_seed, k));
}

}  // namespace

std::vector<std::uint8_t> SurvivalForest::serialize() const {
  ByteWriter out;
  write_forest_params(out, params_);
  write_schema_and_responses(out, schema_, responses_);
  out.u64(trees_.size());
  for (std::size_t k = 0; k < trees_.size(); ++k) {
    out.u64(k);
    trees_[k].serialize(out);
  }
  return out.take();
}

SurvivalForest SurvivalForest::deserialize(std::span<const std::uint8_t> payload) {
  ByteReader in(payload);
  ForestParams params = read_forest_params(in);
  std::vector<std::string> schema;
  std::vector<SurvivalSample> responses;
  read_schema_and_responses(in, schema, responses);
  const std::uint64_t count = in.u64();
  std::vector<SurvivalTree> trees;
  trees.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    if (in.u64() != k) throw CorruptModel("forest trees are out of order");
    trees.push_back(SurvivalTree::deserialize(in));
  }
  if (!in.done()) throw CorruptModel("trailing bytes after forest payload");
  return SurvivalForest(std::move(params), std::move(schema), std::move(responses), std::move(trees));
}

std::vector<std::uint8_t> PartialModel::serialize() const {
  ByteWriter out;
  out.u64(begin);
  out.u64(end);
  write_forest_params(out, params);
  write_schema_and_responses(out, schema, responses);
  out.u64(trees.size());
  for (std::size_t k = 0; k < trees.size(); ++k) {
    out.u64(indices[k]);
    trees[k].serialize(out);
  }
  return out.take();
}

PartialModel PartialModel::deserialize(std::span<const std::uint8_t> payload) {
  ByteReader in(payload);
  PartialModel p;
  p.begin = in.u64();
  p.end = in.u64();
  p.params = read_forest_params(in);
  read_schema_and_responses(in, p.schema, p.responses);
  const std::uint64_t count = in.u64();
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::uint64_t index = in.u64();
    if (index < p.begin || index >= p.end)
      throw CorruptModel("partial model tree index lies outside its declared range");
    p.indices.push_back(index);
    p.trees.push_back(SurvivalTree::deserialize(in));
  }
  if (!in.done()) throw CorruptModel("trailing bytes after partial model payload");
  return p;
}

std::uint64_t subsample_seed(std::uint64_t master_seed, std::size_t tree_index) {
  return hash_combine(hash_combine(master_seed, tree_index), hash_tag("subsample"));
}

std::uint64_t grow_seed(std::uint64_t master_seed, std::size_t tree_index) {
  return hash_combine(hash_combine(master_seed, tree_index), hash_tag("grow"));
}

std::vector<double> tree_row_weights(std::size_t rows, const ForestParams& params,
                                     std::size_t tree_index) {
  std::vector<double> w(rows, 0.0);
  if (params.subsample_fraction >= 1.0) {
    std::fill(w.begin(), w.end(), 1.0);
    return w;
  }
  const auto take = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(params.subsample_fraction * static_cast<double>(rows))));
  std::vector<std::size_t> idx(rows);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(subsample_seed(params.master_seed, tree_index));
  for (std::size_t k = 0; k < take && k < rows; ++k) {
    const std::size_t j = k + rng.below(rows - k);
    std::swap(idx[k], idx[j]);
    w[idx[k]] = 1.0;
  }
  return w;
}

SurvivalForest train_forest(const Dataset& data, const ForestParams& params, std::size_t workers) {
  if (workers < 1) throw InvalidInput("worker count must be at least 1");
  if (data.rows() == 0) throw InvalidInput("cannot train a forest on an empty dataset");
  validate_forest_params(params, data.cols());
  std::vector<SurvivalTree> trees(params.n_trees);
  parallel_for(params.n_trees, workers, [&](std::size_t k) { trees[k] = train_one(data, params, k); });
  return SurvivalForest(params, data.schema(), data.responses(), std::move(trees));
}

PartialModel train_partial(const Dataset& data, const ForestParams& params, std::size_t begin,
                           std::size_t end, std::size_t workers) {
  if (data.rows() == 0) throw InvalidInput("cannot train a forest on an empty dataset");
  validate_forest_params(params, data.cols());
  if (begin >= end) throw InvalidInput("partial tree index range is empty");
  if (end > params.n_trees)
    throw InvalidInput("partial tree index range [" + std::to_string(begin) + ", " + std::to_string(end) +
                       ") exceeds n_trees = " + std::to_string(params.n_trees));
  PartialModel p;
  p.params = params;
  p.schema = data.schema();
  p.responses = data.responses();
  p.begin = begin;
  p.end = end;
  p.indices.resize(end - begin);
  std::iota(p.indices.begin(), p.indices.end(), begin);
  p.trees.resize(end - begin);
  parallel_for(end - begin, workers,
               [&](std::size_t k) { p.trees[k] = train_one(data, params, begin + k); });
  return p;
}

SurvivalForest merge_partials(std::span<const PartialModel> partials) {
  if (partials.empty()) throw InvalidInput("nothing to merge");
  const PartialModel& first = partials.front();
  std::map<std::size_t, const SurvivalTree*> by_index;
  for (const auto& p : partials) {
    if (!(p.params == first.params)) throw InvalidInput("partial models were trained with different parameters");
    if (p.schema != first.schema) throw InvalidInput("partial models have different covariate schemas");
    if (p.responses != first.responses) throw InvalidInput("partial models were trained on different data");
    if (p.indices.size() != p.trees.size()) throw InvalidInput("partial model index/tree count mismatch");
    for (std::size_t k = 0; k < p.trees.size(); ++k) {
      const std::size_t index = p.indices[k];
      if (index < p.begin || index >= p.end)
        throw InvalidInput("tree index " + std::to_string(index) + " lies outside its partial's range");
      if (!by_index.emplace(index, &p.trees[k]).second)
        throw InvalidInput("duplicate tree index " + std::to_string(index));
    }
  }
  const std::size_t n = first.params.n_trees;
  std::vector<SurvivalTree> trees;
  trees.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto it = by_index.find(k);
    if (it == by_index.end()) throw InvalidInput("missing tree index " + std::to_string(k));
    trees.push_back(*it->second);
  }
  if (by_index.size() != n)
    throw InvalidInput("tree index " + std::to_string(by_index.rbegin()->first) +
                       " exceeds n_trees = " + std::to_string(n));
  return SurvivalForest(first.params, first.schema, first.responses, std::move(trees));
}

SurvivalCurve forest_predict_curve(const SurvivalForest& forest, std::span<const double> x,
                                   Aggregation aggregation) {
  return forest.predict_curve(x, aggregation);
}

std::vector<SurvivalCurve> predict_batch(const SurvivalForest& forest,
                                         std::span<const std::vector<double>> players,
                                         std::size_t workers, Aggregation aggregation) {
  if (workers < 1) throw InvalidInput("worker count must be at least 1");
  for (std::size_t i = 0; i < players.size(); ++i)
    if (players[i].size() != forest.schema().size())
      throw InvalidInput("player " + std::to_string(i) + " has " + std::to_string(players[i].size()) +
                         " covariates, model schema has " + std::to_string(forest.schema().size()));
  std::vector<SurvivalCurve> out(players.size());
  parallel_for(players.size(), workers,
               [&](std::size_t i) { out[i] = forest.predict_curve(players[i], aggregation); });
  return out;
}

void save_model(const SurvivalForest& forest, const std::filesystem::path& path) {
  write_file(path, wrap_envelope(ModelKind::forest, forest.serialize()));
}

SurvivalForest load_model(const std::filesystem::path& path) {
  const auto env = unwrap_envelope(read_file(path));
  if (env.kind != ModelKind::forest) throw InvalidInput(path.string() + " is not a forest model file");
  return SurvivalForest::deserialize(env.payload);
}

void save_partial(const PartialModel& partial, const std::filesystem::path& path) {
  write_file(path, wrap_envelope(ModelKind::partial, partial.serialize()));
}

PartialModel load_partial(const std::filesystem::path& path) {
  const auto env = unwrap_envelope(read_file(path));
  if (env.kind != ModelKind::partial) throw InvalidInput(path.string() + " is not a partial model file");
  return PartialModel::deserialize(env.payload);
}

}  // namespace churn
