#include "churn/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "churn/csv.hpp"
#include "churn/error.hpp"

namespace churn::cli {

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const InvalidInput&) {
    return kInvalidInput;
  } catch (const NumericFailure&) {
    return kNumericFailure;
  } catch (const IoError&) {
    return kIoFailure;
  } catch (const std::filesystem::filesystem_error&) {
    return kIoFailure;
  } catch (...) {
    return 1;
  }
}

std::string fingerprint_line(const std::string& subcommand, const std::string& resolved_config) {
  return "churn " + subcommand + " config=" + csv::fingerprint(resolved_config);
}

namespace {

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

void run_simulate(const SimulateOptions& options) {
  if (options.out.has_parent_path()) ensure_dir(options.out.parent_path());
  simulate_logs(options.config, options.out, options.workers);
}

FeaturizeSummary run_featurize(const FeaturizeOptions& options) {
  const IngestResult logs = ingest_logs(options.logs);
  Timestamp end;
  if (options.end_date) {
    const auto parsed = parse_timestamp(*options.end_date);
    if (!parsed) throw InvalidInput("invalid --end-date '" + *options.end_date + "' (expected YYYY-MM-DD)");
    end = Timestamp{std::chrono::floor<std::chrono::days>(*parsed)} + std::chrono::hours{24} -
          std::chrono::seconds{1};
  } else {
    end = latest_event_day(logs);
  }
  FeaturizeSummary summary;
  const auto cohort = featurize(logs, end, options.revenue_share, options.workers, &summary);
  ensure_dir(options.out);
  const std::string fp = fingerprint_line("featurize", options.resolved_config);
  write_features_csv(cohort, options.out / "features.csv", fp);
  for (Outcome outcome : {Outcome::level, Outcome::playtime}) {
    const auto ds = build_dataset(cohort, outcome);
    write_dataset_csv(ds.data, options.out / (outcome_name(outcome) + ".csv"),
                      fp + " model_kind=" + outcome_name(outcome));
  }
  {
    auto out = open_output(options.out / "rejects.txt");
    out << logs.rejects.size() << " of " << logs.records << " records rejected\n";
    for (const auto& r : logs.rejects) out << "line " << r.line << ": " << r.reason << '\n';
  }
  {
    auto out = open_output(options.out / "cohort_summary.csv");
    out << "# " << fp << '\n' << "key,value\n";
    out << "observation_end," << format_timestamp(end) << '\n';
    out << "players_seen," << summary.players_seen << '\n';
    out << "excluded_no_login," << summary.excluded_no_login << '\n';
    out << "revenue_share," << csv::format_double(options.revenue_share) << '\n';
    out << "cohort_players," << summary.cohort << '\n';
    out << "cohort_churned," << summary.churned << '\n';
    out << "churn_rate,"
        << csv::format_double(summary.cohort ? static_cast<double>(summary.churned) / summary.cohort : 0.0) << '\n';
    out << "revenue_total," << csv::format_double(summary.revenue_total) << '\n';
    out << "revenue_cohort," << csv::format_double(summary.revenue_cohort) << '\n';
    out << "top_spender_cut," << csv::format_double(summary.min_cohort_spend) << '\n';
  }
  return summary;
}

IndexRange parse_index_range(const std::string& text) {
  const auto pos = text.find("..");
  if (pos == std::string::npos) throw InvalidInput("partial range must look like a..b, got '" + text + "'");
  const double a = csv::parse_double(text.substr(0, pos), "range start");
  const double b = csv::parse_double(text.substr(pos + 2), "range end");
  if (a < 0 || b < 0 || a != std::floor(a) || b != std::floor(b))
    throw InvalidInput("partial range bounds must be nonnegative integers");
  return {static_cast<std::size_t>(a), static_cast<std::size_t>(b)};
}

std::string run_train(const TrainOptions& options) {
  const Dataset data = read_dataset_csv(options.data);
  const auto start = std::chrono::steady_clock::now();
  std::ostringstream summary;
  if (options.out.has_parent_path()) ensure_dir(options.out.parent_path());

  auto describe_trees = [&](const std::vector<SurvivalTree>& trees) {
    std::size_t max_depth = 0;
    double depth_sum = 0.0, leaf_sum = 0.0;
    for (const auto& t : trees) {
      max_depth = std::max(max_depth, t.depth());
      depth_sum += static_cast<double>(t.depth());
      leaf_sum += static_cast<double>(t.leaf_count());
    }
    const double n = static_cast<double>(std::max<std::size_t>(trees.size(), 1));
    summary << "trees: " << trees.size() << "\nmean depth: " << fixed(depth_sum / n, 2)
            << "\nmax depth: " << max_depth << "\nmean leaves: " << fixed(leaf_sum / n, 2) << '\n';
  };

  if (options.partial) {
    if (options.model != ModelType::forest) throw InvalidInput("--partial only applies to forest models");
    const PartialModel p =
        train_partial(data, options.forest, options.partial->begin, options.partial->end, options.workers);
    save_partial(p, options.out);
    summary << "partial model: trees [" << p.begin << ", " << p.end << ")\n";
    describe_trees(p.trees);
  } else {
    ModelSpec spec;
    spec.type = options.model;
    spec.forest = options.forest;
    spec.workers = options.workers;
    const SurvivalModel model = fit_model(spec, data);
    save_any_model(model, options.out);
    summary << "model: " << model_type_name(options.model) << "\nrows: " << data.rows() << '\n';
    if (const auto* f = std::get_if<SurvivalForest>(&model)) describe_trees(f->trees());
    if (const auto* c = std::get_if<CoxModel>(&model)) {
      summary << "newton iterations: " << c->iterations << '\n';
      for (std::size_t j = 0; j < c->schema.size(); ++j)
        summary << "beta[" << c->schema[j] << "]: " << csv::format_double(c->beta[j]) << '\n';
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  summary << "wall time: " << fixed(secs, 3) << " s\n";
  return summary.str();
}

void run_merge(const std::vector<fs::path>& partials, const fs::path& out) {
  std::vector<PartialModel> loaded;
  for (const auto& p : partials) loaded.push_back(load_partial(p));
  const SurvivalForest forest = merge_partials(loaded);
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  save_model(forest, out);
}

void run_predict(const PredictOptions& options) {
  const SurvivalModel model = load_any_model(options.model);
  const PlayerTable players = read_player_table(options.players, model_schema(model));
  const auto curves = predict_curves(model, players.rows, options.workers, options.aggregation);
  ensure_dir(options.out);
  const std::string fp = fingerprint_line("predict", options.resolved_config);
  auto out = open_output(options.out / "curves.csv");
  out << "# " << fp << '\n' << "player_id,t,S\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    out << players.ids[i] << ",0,1\n";
    for (std::size_t k = 0; k < curves[i].size(); ++k)
      out << players.ids[i] << ',' << csv::format_double(curves[i].grid()[k]) << ','
          << csv::format_double(curves[i].probs()[k]) << '\n';
  }
  auto med = open_output(options.out / "medians.csv");
  med << "# " << fp << '\n' << "player_id,median\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto m = median_survival(curves[i]);
    med << players.ids[i] << ',' << (m ? csv::format_double(*m) : std::string("unreached")) << '\n';
  }
}

std::vector<EvaluationRow> run_evaluate(const EvaluateOptions& options) {
  if (!options.level_data && !options.playtime_data)
    throw InvalidInput("evaluate needs --level-data and/or --playtime-data");
  if (options.models.empty()) throw InvalidInput("evaluate needs at least one model");
  ensure_dir(options.out);
  const std::string fp = fingerprint_line("evaluate", options.resolved_config);

  auto brier_out = open_output(options.out / "brier_curves.csv");
  brier_out << "# " << fp << '\n' << "outcome,model,t,brier\n";
  auto dev_out = open_output(options.out / "deviations.csv");
  dev_out << "# " << fp << '\n' << "outcome,model,player_id,observed,predicted_median,relative_deviation\n";
  auto dev_summary = open_output(options.out / "deviation_summary.csv");
  dev_summary << "# " << fp << '\n' << "outcome,model,rows,excluded_unreached,excluded_censored,iqr\n";

  std::vector<EvaluationRow> rows;
  std::vector<std::pair<Outcome, fs::path>> inputs;
  if (options.level_data) inputs.emplace_back(Outcome::level, *options.level_data);
  if (options.playtime_data) inputs.emplace_back(Outcome::playtime, *options.playtime_data);

  for (const auto& [outcome, path] : inputs) {
    const Dataset data = read_dataset_csv(path);
    const std::string oname = outcome_name(outcome);
    const SurvivalCurve censoring = censoring_km(data.responses());
    const double t_max = default_horizon(data.responses(), options.horizon_quantile);

    // Figure exports use the holdout test rows unless scoring in-sample.
    Dataset fit_set = data, score_set = data;
    if (!options.insample) {
      const Split split = holdout_split(data.rows(), options.test_fraction, options.seed);
      fit_set = data.subset(split.train);
      score_set = data.subset(split.test);
    }

    for (ModelType type : options.models) {
      ModelSpec spec;
      spec.type = type;
      spec.forest = options.forest;
      spec.aggregation = options.aggregation;
      spec.workers = options.workers;
      const std::string mname = model_type_name(type);

      const SurvivalModel model = fit_model(spec, fit_set);
      const auto curves = predict_curves(model, score_set, options.workers, options.aggregation);
      const BrierCurve bc = brier_curve(curves, score_set.responses(), censoring, t_max, options.grid_size, mname);
      const double split_ibs = trapezoid_mean(bc.grid, bc.values);

      EvaluationRow row;
      row.outcome = outcome;
      if (options.bootstrap > 0) {
        BootstrapOptions bo;
        bo.replicates = options.bootstrap;
        bo.seed = options.seed;
        bo.workers = options.workers;
        bo.insample = options.insample;
        bo.t_max = t_max;
        bo.grid_size = options.grid_size;
        row.entry = bootstrap_cv(data, spec, bo);
        row.headline = row.entry.bootstrap_mean;
        row.protocol = options.insample ? "bootstrap-insample" : "bootstrap-oob";
      } else {
        row.entry.model = mname;
        row.entry.ibs = split_ibs;
        row.entry.bootstrap_mean = split_ibs;
        row.entry.bootstrap_sd = 0.0;
        row.entry.replicates = 1;
        row.entry.t_max = t_max;
        row.headline = split_ibs;
        row.protocol = options.insample ? "insample" : "holdout";
      }

      for (std::size_t k = 0; k < bc.grid.size(); ++k)
        brier_out << oname << ',' << mname << ',' << csv::format_double(bc.grid[k]) << ','
                  << csv::format_double(bc.values[k]) << '\n';
      const DeviationTable dev = deviation_export(curves, score_set, mname);
      std::vector<double> rel;
      for (const auto& r : dev.rows) {
        dev_out << oname << ',' << mname << ',' << r.id << ',' << csv::format_double(r.observed) << ','
                << csv::format_double(r.predicted) << ',' << csv::format_double(r.relative_deviation) << '\n';
        rel.push_back(r.relative_deviation);
      }
      row.deviation_iqr = rel.empty() ? std::nan("") : interquartile_range(rel);
      dev_summary << oname << ',' << mname << ',' << dev.rows.size() << ',' << dev.excluded_unreached << ','
                  << dev.excluded_censored << ',' << csv::format_double(row.deviation_iqr) << '\n';
      rows.push_back(row);
    }
  }

  auto detail = open_output(options.out / "ibs_detail.csv");
  detail << "# " << fp << '\n'
         << "outcome,model,protocol,ibs,bootstrap_mean,bootstrap_sd,B,redraws,t_max\n";
  for (const auto& r : rows)
    detail << outcome_name(r.outcome) << ',' << r.entry.model << ',' << r.protocol << ','
           << csv::format_double(r.entry.ibs) << ',' << csv::format_double(r.entry.bootstrap_mean) << ','
           << csv::format_double(r.entry.bootstrap_sd) << ',' << r.entry.replicates << ',' << r.entry.redraws
           << ',' << csv::format_double(r.entry.t_max) << '\n';

  auto table = open_output(options.out / "ibs_table.csv");
  table << "# " << fp << '\n' << "Model, IBS level, IBS playtime\n";
  for (ModelType type : options.models) {
    const std::string mname = model_type_name(type);
    table << mname;
    for (Outcome outcome : {Outcome::level, Outcome::playtime}) {
      table << ", ";
      for (const auto& r : rows)
        if (r.outcome == outcome && r.entry.model == mname) table << fixed(r.headline);
    }
    table << '\n';
  }
  return rows;
}

}  // namespace churn::cli
