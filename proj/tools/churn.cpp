// churn: simulate | featurize | train | merge | predict | evaluate

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "churn/cli.hpp"
#include "churn/error.hpp"

namespace fs = std::filesystem;
using namespace churn;

namespace {

void add_forest_options(CLI::App* cmd, ForestParams& p) {
  cmd->add_option("--trees", p.n_trees, "Number of trees")->check(CLI::PositiveNumber);
  cmd->add_option("--alpha", p.tree.alpha, "Significance level for the variable-selection test");
  cmd->add_option("--min-node-weight", p.tree.min_node_weight, "Minimum node weight to attempt a split");
  cmd->add_option("--min-child-weight", p.tree.min_child_weight, "Minimum weight per child");
  cmd->add_option("--mtry", p.tree.mtry, "Covariates drawn per node (0 = ceil(sqrt(p)))");
  cmd->add_flag("--bonferroni", p.tree.bonferroni, "Bonferroni-adjust p-values across tested covariates");
  cmd->add_option("--subsample", p.subsample_fraction, "Per-tree subsample fraction (without replacement)");
}

const std::map<std::string, Aggregation> kAggregations = {{"weights", Aggregation::weights},
                                                          {"curves", Aggregation::curves}};

// Resolved configuration (defaults included) of the selected subcommand.
std::string resolved(const CLI::App& app) { return app.config_to_str(true, false); }

void record_config(const CLI::App& app, const fs::path& dir, const std::string& name) {
  std::error_code ec;
  if (!dir.empty()) fs::create_directories(dir, ec);
  std::ofstream out(dir / (name + "_config.ini"));
  if (!out) throw IoError("cannot write run config into " + dir.string());
  out << resolved(app);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional inference survival ensembles for level and playtime churn prediction"};
  app.set_config("--config", "", "Read options from a TOML/INI config file");
  app.require_subcommand(1);

  std::size_t workers = 1;
  app.add_option("--workers", workers, "Worker threads (default from CHURN_WORKERS)")
      ->envname("CHURN_WORKERS")
      ->check(CLI::PositiveNumber);

  // simulate
  cli::SimulateOptions sim;
  std::string scenario = "nonlinear";
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic player action log");
  simulate->add_option("--n", sim.config.players, "Number of players")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.config.seed, "Random seed");
  simulate->add_option("--scenario", scenario, "nonlinear | linear");
  simulate->add_option("--window-days", sim.config.window_days, "Observation window length in days");
  simulate->add_option("--out", sim.out, "Output log file")->required();

  // featurize
  cli::FeaturizeOptions feat;
  auto* featurize = app.add_subcommand("featurize", "Build level and playtime datasets from an event log");
  featurize->add_option("--logs", feat.logs, "Event log")->required();
  featurize->add_option("--end-date", feat.end_date, "Observation end date YYYY-MM-DD (default: latest event day)");
  featurize->add_option("--revenue-share", feat.revenue_share, "Revenue share covered by the selected top spenders");
  featurize->add_option("--out", feat.out, "Output directory")->required();

  // train
  cli::TrainOptions train;
  std::string model_name = "forest";
  std::string partial;
  auto* train_cmd = app.add_subcommand("train", "Train a forest, Cox or Kaplan-Meier model");
  train_cmd->add_option("--data", train.data, "Dataset CSV")->required();
  train_cmd->add_option("--model", model_name, "forest | cox | km");
  add_forest_options(train_cmd, train.forest);
  train_cmd->add_option("--seed", train.forest.master_seed, "Master seed");
  train_cmd->add_option("--partial", partial, "Train only trees a..b (half-open) into a partial model");
  train_cmd->add_option("--out", train.out, "Model file")->required();

  // merge
  std::vector<fs::path> partial_files;
  fs::path merge_out;
  auto* merge = app.add_subcommand("merge", "Merge partial forest models into one model");
  merge->add_option("partials", partial_files, "Partial model files")->required();
  merge->add_option("--out", merge_out, "Merged model file")->required();

  // predict
  cli::PredictOptions pred;
  std::string pred_aggregate = "weights";
  auto* predict = app.add_subcommand("predict", "Predict survival curves and medians per player");
  predict->add_option("--model", pred.model, "Model file")->required();
  predict->add_option("--players", pred.players, "Player covariate CSV")->required();
  predict->add_option("--aggregate", pred_aggregate, "weights | curves");
  predict->add_option("--out", pred.out, "Output directory")->required();

  // evaluate
  cli::EvaluateOptions eval;
  std::vector<std::string> eval_models = {"forest", "cox", "km"};
  std::string eval_aggregate = "weights";
  auto* evaluate = app.add_subcommand("evaluate", "Compare models by integrated Brier score");
  evaluate->add_option("--level-data", eval.level_data, "Level dataset CSV");
  evaluate->add_option("--playtime-data", eval.playtime_data, "Playtime dataset CSV");
  evaluate->add_option("--models", eval_models, "Models to compare")->delimiter(',');
  add_forest_options(evaluate, eval.forest);
  evaluate->add_option("--aggregate", eval_aggregate, "weights | curves");
  evaluate->add_option("--bootstrap", eval.bootstrap, "Bootstrap replicates (0 = single holdout split)");
  evaluate->add_option("--test-fraction", eval.test_fraction, "Holdout fraction");
  evaluate->add_flag("--insample", eval.insample, "Score on the training rows");
  evaluate->add_option("--seed", eval.seed, "Seed for splits, resampling and forests");
  evaluate->add_option("--horizon-quantile", eval.horizon_quantile, "Quantile of event times used as t_max");
  evaluate->add_option("--grid-size", eval.grid_size, "Integration grid points");
  evaluate->add_option("--out", eval.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kInvalidInput;
  }

  try {
    if (simulate->parsed()) {
      sim.config.scenario = parse_scenario(scenario);
      sim.workers = workers;
      sim.resolved_config = resolved(app);
      record_config(app, sim.out.parent_path(), "simulate");
      cli::run_simulate(sim);
      std::cout << "wrote " << sim.out.string() << '\n';
    } else if (featurize->parsed()) {
      feat.workers = workers;
      feat.resolved_config = resolved(app);
      record_config(app, feat.out, "featurize");
      const auto s = cli::run_featurize(feat);
      std::cout << "players: " << s.players_seen << ", cohort: " << s.cohort << ", churned: " << s.churned
                << '\n';
    } else if (train_cmd->parsed()) {
      train.model = parse_model_type(model_name);
      train.workers = workers;
      if (!partial.empty()) train.partial = cli::parse_index_range(partial);
      record_config(app, train.out.parent_path(), "train");
      std::cout << cli::run_train(train);
    } else if (merge->parsed()) {
      record_config(app, merge_out.parent_path(), "merge");
      cli::run_merge(partial_files, merge_out);
      std::cout << "merged " << partial_files.size() << " partial models into " << merge_out.string() << '\n';
    } else if (predict->parsed()) {
      pred.workers = workers;
      pred.aggregation = kAggregations.count(pred_aggregate) ? kAggregations.at(pred_aggregate)
                                                             : throw InvalidInput("unknown --aggregate");
      pred.resolved_config = resolved(app);
      record_config(app, pred.out, "predict");
      cli::run_predict(pred);
    } else if (evaluate->parsed()) {
      eval.workers = workers;
      eval.models.clear();
      for (const auto& m : eval_models) eval.models.push_back(parse_model_type(m));
      eval.aggregation = kAggregations.count(eval_aggregate) ? kAggregations.at(eval_aggregate)
                                                             : throw InvalidInput("unknown --aggregate");
      eval.forest.master_seed = eval.seed;
      eval.resolved_config = resolved(app);
      record_config(app, eval.out, "evaluate");
      const auto rows = cli::run_evaluate(eval);
      std::cout << "outcome,model,protocol,ibs\n";
      for (const auto& r : rows)
        std::cout << outcome_name(r.outcome) << ',' << r.entry.model << ',' << r.protocol << ',' << r.headline
                  << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::exit_code_for_current_exception();
  }
  return 0;
}
