// Acceptance suite: one PASS/FAIL line per criterion. With arguments, only
// the listed criterion numbers run.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include <unistd.h>

#include "churn/cli.hpp"
#include "churn/error.hpp"
#include "churn/rank_stats.hpp"
#include "test_support.hpp"

using namespace churn;
namespace fs = std::filesystem;

namespace {

struct Result {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << "first failure: " << what << "; ";
    pass = pass && ok;
  }
};

fs::path work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("churn_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::size_t cores() { return std::max(1u, std::thread::hardware_concurrency()); }

// simulate -> featurize -> evaluate (holdout, 300 trees); returns headline IBS
// keyed by (outcome, model).
std::map<std::pair<std::string, std::string>, double> pipeline(Scenario scenario) {
  const fs::path dir = work_dir() / scenario_name(scenario);
  cli::SimulateOptions sim;
  sim.config.players = 5000;
  sim.config.seed = 7;
  sim.config.scenario = scenario;
  sim.out = dir / "logs.csv";
  sim.workers = cores();
  cli::run_simulate(sim);

  cli::FeaturizeOptions feat;
  feat.logs = sim.out;
  feat.out = dir / "features";
  feat.workers = cores();
  cli::run_featurize(feat);

  cli::EvaluateOptions eval;
  eval.level_data = feat.out / "level.csv";
  eval.playtime_data = feat.out / "playtime.csv";
  eval.forest.n_trees = 300;
  eval.workers = cores();
  eval.out = dir / "eval";
  std::map<std::pair<std::string, std::string>, double> out;
  for (const auto& row : cli::run_evaluate(eval)) out[{outcome_name(row.outcome), row.entry.model}] = row.headline;
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

Result criterion1() {
  Result r;
  const auto ibs = pipeline(Scenario::nonlinear);
  for (const char* outcome : {"level", "playtime"}) {
    const double f = ibs.at({outcome, "forest"}), c = ibs.at({outcome, "cox"}), k = ibs.at({outcome, "km"});
    r.detail << outcome << " forest " << fmt(f) << " cox " << fmt(c) << " km " << fmt(k) << "; ";
    r.require(f < c && c < k, std::string(outcome) + " ordering forest < cox < km");
    r.require(k - f >= 0.03, std::string(outcome) + " km - forest >= 0.03");
  }
  return r;
}

Result criterion2() {
  Result r;
  const auto ibs = pipeline(Scenario::linear);
  for (const char* outcome : {"level", "playtime"}) {
    const double f = ibs.at({outcome, "forest"}), c = ibs.at({outcome, "cox"});
    r.detail << outcome << " |cox - forest| = " << fmt(std::fabs(c - f)) << "; ";
    r.require(std::fabs(c - f) < 0.01, std::string(outcome) + " gap below 0.01");
  }
  return r;
}

Result criterion3() {
  Result r;
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<std::size_t> size(1, 12);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto inst = oracle::random_instance(gen, size(gen), false, 0.15);
    const auto curve = kaplan_meier(inst.samples, inst.weights);
    const auto [grid, probs] = oracle::km(inst.samples, inst.weights);
    r.require(curve.grid() == grid, "grid of instance " + std::to_string(rep));
    if (curve.grid() != grid) continue;
    for (std::size_t k = 0; k < grid.size(); ++k) worst = std::max(worst, std::fabs(curve.probs()[k] - probs[k]));
  }
  r.require(worst <= 1e-12, "probability within 1e-12");
  r.detail << "200 instances, max |dS| = " << worst;
  return r;
}

Result criterion4() {
  Result r;
  std::mt19937_64 gen(4);
  std::normal_distribution<double> z;
  double worst = 0.0;
  int degenerate = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 2 + rep % 6;
    auto inst = oracle::random_instance(gen, n, true);
    inst.samples[0].event = true;
    const auto a = logrank_scores(inst.samples, inst.weights);
    std::vector<double> h(n);
    for (auto& v : h) v = rep % 3 == 0 ? std::round(z(gen)) : z(gen);
    const auto [mean, var] = oracle::permutation_moments(a, h);
    const auto m = conditional_moments(a, h, inst.weights);
    if (!m) {
      ++degenerate;
      r.require(std::fabs(var) < 1e-12, "degenerate only when the permutation variance vanishes");
      continue;
    }
    worst = std::max({worst, std::fabs(m->mu - mean), std::fabs(m->sigma2 - var)});
  }
  r.require(worst < 1e-9, "moments within 1e-9");
  r.detail << "50 instances (" << degenerate << " degenerate), max error " << worst;
  return r;
}

Result criterion5() {
  Result r;
  double beta_err = 0.0, grad = 0.0, ratio_err = 0.0;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    std::mt19937_64 gen(100 + seed);
    std::normal_distribution<double> z;
    std::exponential_distribution<double> e(1.0);
    const std::size_t n = 25 + 15 * seed;
    const double true_beta = 0.3 * static_cast<double>(seed % 5) - 0.6;
    std::vector<double> x(n);
    std::vector<SurvivalSample> s(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = std::round(z(gen) * 10.0) / 10.0;
      const double t = e(gen) / std::exp(true_beta * x[i]), c = e(gen) * 2.0;
      s[i] = {std::ceil(std::min(t, c) * 5.0), t <= c};
    }
    const auto data = oracle::make_dataset({x}, s);
    const auto model = fit_cox(data);
    beta_err = std::max(beta_err, std::fabs(model.beta[0] - oracle::cox_beta(s, x)));

    std::vector<double> centered(n);
    for (std::size_t i = 0; i < n; ++i) centered[i] = x[i] - model.covariate_means[0];
    grad = std::max(grad, std::fabs(cox_derivatives(s, centered, 1, model.beta).gradient[0]));

    const std::vector<double> x1 = {-1.0}, x2 = {0.5};
    const auto c1 = cox_predict_curve(model, x1), c2 = cox_predict_curve(model, x2);
    const double want = std::exp(model.beta[0] * (x1[0] - x2[0]));
    for (std::size_t k = 0; k < c1.size(); ++k) {
      const double h1 = -std::log(c1.probs()[k]), h2 = -std::log(c2.probs()[k]);
      if (h1 <= 0.0 || h2 <= 0.0 || !std::isfinite(h1) || !std::isfinite(h2)) continue;
      ratio_err = std::max(ratio_err, std::fabs(h1 / h2 - want) / want);
    }
  }
  r.require(beta_err < 1e-6, "beta within 1e-6 of the 1-D maximizer");
  r.require(grad < 1e-6, "gradient below 1e-6");
  r.require(ratio_err < 1e-9, "hazard ratio within 1e-9");
  r.detail << "12 fixtures, max |dbeta| " << beta_err << ", max |grad| " << grad << ", max PH error " << ratio_err;
  return r;
}

Result criterion6() {
  Result r;
  auto constant = [](double p) { return SurvivalCurve({0.0}, {p}); };
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> u;
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<SurvivalSample> s;
    std::vector<SurvivalCurve> curves;
    for (int i = 0; i < 10; ++i) {
      s.push_back({std::floor(u(gen) * 8.0) + 1.0, true});
      const double a = u(gen), b = u(gen);
      curves.push_back(SurvivalCurve({2.5, 5.5}, {std::max(a, b), std::min(a, b)}));
    }
    const auto g = censoring_km(s);
    for (double t : {1.0, 3.0, 6.0}) {
      double mse = 0.0;
      for (int i = 0; i < 10; ++i) {
        const double y = s[i].time > t ? 1.0 : 0.0;
        mse += (y - curves[i](t)) * (y - curves[i](t)) / 10.0;
      }
      worst = std::max(worst, std::fabs(brier_score(curves, s, t, g) - mse));
    }
  }
  r.require(worst <= 1e-12, "uncensored Brier equals MSE");

  std::vector<SurvivalSample> full = {{1, true}, {2, true}, {4, true}, {8, true}};
  std::vector<SurvivalCurve> half(4, constant(0.5));
  const double ibs_half = integrated_brier(half, full, 7.0, 100);
  r.require(ibs_half == 0.25, "constant 0.5 gives IBS 0.25");

  const std::vector<SurvivalSample> six = {{1, true}, {2, false}, {3, true}, {4, false}, {5, true}, {6, true}};
  const std::vector<SurvivalCurve> preds = {constant(0.2), constant(0.5), constant(0.4),
                                            constant(0.7), constant(0.9), constant(0.6)};
  const double hand = (0.04 + 0.16 / 0.8 + 0.09 / 0.8 + 0.01 / 0.8 + 0.16 / 0.8) / 6.0;
  const double got = brier_score(preds, six, 3.5, censoring_km(six));
  r.require(std::fabs(got - hand) < 1e-14, "six-subject fixture");
  r.detail << "MSE max error " << worst << ", IBS(0.5) = " << ibs_half << ", six-subject BS(3.5) = " << got
           << " (hand " << hand << ")";
  return r;
}

Result criterion7() {
  Result r;
  const auto data = oracle::synthetic(77, 600, 7, 4);
  ForestParams p;
  p.n_trees = 60;
  p.master_seed = 2016;
  const auto ref = train_forest(data, p, 1);
  const auto bytes = ref.serialize();
  for (std::size_t w : {2u, 8u}) r.require(train_forest(data, p, w).serialize() == bytes, "workers " + std::to_string(w));
  std::vector<PartialModel> parts = {train_partial(data, p, 25, 60, 2), train_partial(data, p, 0, 25, 1)};
  r.require(merge_partials(parts).serialize() == bytes, "two merged partials");

  std::vector<std::vector<double>> players;
  for (std::size_t i = 0; i < data.rows(); ++i) players.push_back(data.row(i));
  const auto one = predict_batch(ref, players, 1);
  for (std::size_t w : {2u, 8u}) r.require(predict_batch(ref, players, w) == one, "predict_batch workers " + std::to_string(w));
  r.detail << "forest of " << p.n_trees << " trees, " << bytes.size() << " bytes; workers 1/2/8 and 2 partials identical";
  return r;
}

Result criterion8() {
  Result r;
  const fs::path dir = work_dir() / "bootstrap";
  cli::SimulateOptions sim;
  sim.config.players = 5000;
  sim.config.seed = 7;
  sim.out = dir / "logs.csv";
  cli::run_simulate(sim);
  cli::FeaturizeOptions feat;
  feat.logs = sim.out;
  feat.out = dir / "features";
  cli::run_featurize(feat);

  auto run = [&](std::size_t workers, const std::string& name) {
    cli::EvaluateOptions eval;
    eval.level_data = feat.out / "level.csv";
    eval.playtime_data = feat.out / "playtime.csv";
    eval.forest.n_trees = 5;
    eval.bootstrap = 1000;
    eval.seed = 31;
    eval.workers = workers;
    eval.out = dir / name;
    const auto rows = cli::run_evaluate(eval);
    const auto bytes = read_file(dir / name / "ibs_detail.csv");
    return std::make_pair(rows, bytes);
  };
  const auto a = run(1, "w1"), b = run(1, "w1_again"), c = run(4, "w4");
  r.require(a.second == b.second, "repeated run identical");
  r.require(a.second == c.second, "workers 1 vs 4 identical");
  for (std::size_t i = 0; i < a.first.size(); ++i) {
    const auto& x = a.first[i].entry;
    const auto& y = c.first[i].entry;
    r.require(x.bootstrap_mean == y.bootstrap_mean && x.bootstrap_sd == y.bootstrap_sd,
              "bit-identical mean/sd for " + x.model);
    r.detail << outcome_name(a.first[i].outcome) << "/" << x.model << " " << fmt(x.bootstrap_mean) << "±"
             << fmt(x.bootstrap_sd) << "; ";
  }
  r.detail << "B = 1000";
  return r;
}

Result criterion9() {
  Result r;
  const fs::path dir = work_dir() / "fixture";
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "log.csv");
    out << oracle::five_player_log();
  }
  const auto logs = ingest_logs(dir / "log.csv");
  const Timestamp end = *parse_timestamp("2021-01-20T23:59:59Z");
  std::vector<PlayerRecord> all;
  for (const auto& [id, events] : logs.players) {
    const auto label = label_churn(events, end);
    if (label) all.push_back(PlayerRecord{id, compute_features(events, end), *label});
  }

  // Hand-computed table, feature_names() order.
  const std::map<std::string, std::vector<double>> want = {
      {"alice", {1, 1, 1, 10.99 / 9, 10.99 / 9, 1.099, 200, 1500.0 / 9, 210, 2.0 / 9, 1.0 / 9, 0.2,
                 2, 9.99, 5, 1.0, 10.99, 2100, 10, 3, 10, 4, 3, 1, 10.99, 3}},
      {"bob", {2.0 / 9, 1.0 / 9, 3.0 / 11, 0, 0, 0, 100.0 / 9, 50.0 / 9, 150.0 / 11, 0, 0, 0,
               11, 0, 11, 0, 0, 150, 3, 1, 11, 11, 11, 2.0 / 11, 0, 0}},
      {"carol", {2.0 / 9, 2.0 / 9, 3.0 / 14, 40.0 / 9, 50.0 / 9, 50.0 / 14, 400, 400, 3600.0 / 14, 1.0 / 9,
                 1.0 / 9, 1.0 / 14, 7, 40, 13, 10, 50, 3600, 3, 5, 14, 0, 6, 3.0 / 14, 40, 1}},
      {"dave", {1.0 / 9, 1.0 / 9, 1, 25.0 / 9, 25.0 / 9, 25, 200, 200, 1800, 2.0 / 9, 2.0 / 9, 2,
                0, 25, 0, 25, 25, 1800, 1, 3, 1, 0, 0, 1, 25, 1}},
      {"erin", {1.0 / 9, 1.0 / 9, 2.0 / 19, 15.0 / 9, 0, 15.0 / 19, 0, 0, 0, 0, 0, 0,
                0, 15, 0, 15, 15, 0, 2, 1, 19, 18, 19, 2.0 / 19, 15, 1}},
  };
  const std::map<std::string, bool> churned = {
      {"alice", true}, {"bob", true}, {"carol", false}, {"dave", true}, {"erin", false}};
  r.require(all.size() == 5, "five players featurized");
  std::size_t fields = 0;
  for (const auto& rec : all) {
    const auto got = feature_values(rec.features);
    const auto& expect = want.at(rec.player_id);
    for (std::size_t k = 0; k < expect.size(); ++k) {
      const bool ok = std::fabs(got[k] - expect[k]) <= 1e-12 * std::max(1.0, std::fabs(expect[k]));
      r.require(ok, rec.player_id + "." + feature_names()[k]);
      ++fields;
    }
    r.require(rec.label.churned == churned.at(rec.player_id), rec.player_id + " churn label");
  }
  const auto top = select_top_spenders(all, 0.5);
  r.require(top.size() == 2 && top[0].player_id == "carol" && top[1].player_id == "dave",
            "top spenders at 0.5 are carol, dave");

  cli::FeaturizeOptions feat;
  feat.logs = dir / "log.csv";
  feat.end_date = "2021-01-20";
  feat.out = dir / "out";
  const auto s = cli::run_featurize(feat);
  r.require(s.cohort == 2 && s.churned == 1, "CLI cohort of 2 with 1 churned");
  r.detail << fields << " feature values across 5 players, labels incl. 9-day boundary, top-spender prefix";
  return r;
}

Result criterion10() {
  Result r;
  // Curve bounds and monotonicity over 10k random predictions.
  const auto data = oracle::synthetic(10, 400, 5, 3);
  ForestParams p;
  p.n_trees = 40;
  const auto forest = train_forest(data, p, cores());
  const auto cox = fit_cox(data);
  std::mt19937_64 gen(10);
  std::normal_distribution<double> z;
  std::vector<std::vector<double>> players(10000, std::vector<double>(5));
  for (auto& x : players)
    for (auto& v : x) v = 2.0 * z(gen);
  auto curves = predict_batch(forest, players, cores());
  for (std::size_t i = 0; i < 500; ++i) curves.push_back(cox_predict_curve(cox, players[i]));
  std::size_t bad = 0, median_bad = 0, medians = 0;
  for (const auto& c : curves) {
    for (std::size_t k = 0; k < c.size(); ++k) {
      const double v = c.probs()[k];
      if (!(v >= 0.0 && v <= 1.0) || (k > 0 && (v > c.probs()[k - 1] || c.grid()[k] <= c.grid()[k - 1]))) ++bad;
    }
    if (const auto m = median_survival(c)) {
      ++medians;
      if (!(c(*m) <= 0.5 && c.left_limit(*m) > 0.5)) ++median_bad;
    } else if (!c.empty() && c.probs().back() <= 0.5) {
      ++median_bad;
    }
  }
  r.require(bad == 0, "curves monotone within [0, 1]");
  r.require(median_bad == 0, "median is the first time with S <= 0.5");

  // Split structure depends on covariate ranks only (single covariate,
  // alpha = 1, so selection and stopping do not depend on raw values).
  std::size_t invariant = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto base = oracle::synthetic(1000 + seed, 60 + seed % 50, 1, 1);
    const auto col = base.column(0);
    std::vector<double> x(col.begin(), col.end()), fx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) fx[i] = std::exp(3.0 * x[i]) + x[i] * x[i] * x[i];
    TreeParams tp;
    tp.alpha = 1.0;
    tp.min_node_weight = 10;
    tp.min_child_weight = 4;
    std::vector<double> w(x.size(), 1.0);
    auto leaves = [&](const std::vector<double>& cov) {
      const auto d = oracle::make_dataset({cov}, base.responses());
      const auto t = grow_tree(d, w, tp, seed);
      std::set<std::vector<std::uint32_t>> sets;
      for (std::size_t k = 0; k < t.nodes().size(); ++k)
        if (t.nodes()[k].covariate < 0) {
          auto rows = t.leaf_rows(k);
          std::vector<std::uint32_t> v(rows.begin(), rows.end());
          std::sort(v.begin(), v.end());
          sets.insert(v);
        }
      return sets;
    };
    if (leaves(x) == leaves(fx)) ++invariant;
  }
  r.require(invariant == 100, "leaf partitions identical under a monotone transform");
  r.detail << curves.size() << " curves checked, " << medians << " medians, " << invariant
           << "/100 trees rank invariant";
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Result()>>> criteria = {
      {"nonlinear scenario: forest < cox < km, km - forest >= 0.03", criterion1},
      {"linear scenario: |cox - forest| < 0.01", criterion2},
      {"Kaplan-Meier product-limit oracle", criterion3},
      {"permutation moment oracle", criterion4},
      {"Cox 1-D partial likelihood oracle", criterion5},
      {"Brier / IBS oracles", criterion6},
      {"parallel and partial training determinism", criterion7},
      {"bootstrap reproducibility", criterion8},
      {"feature pipeline fixture", criterion9},
      {"curve, median and rank-invariance properties", criterion10},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Result res;
    try {
      res = criteria[k].second();
    } catch (const std::exception& e) {
      res.pass = false;
      res.detail << "exception: " << e.what();
    }
    std::printf("%s criterion %d: %s -- %s\n", res.pass ? "PASS" : "FAIL", id, criteria[k].first.c_str(),
                res.detail.str().c_str());
    std::fflush(stdout);
    if (!res.pass) ++failures;
  }
  fs::remove_all(work_dir());
  return failures == 0 ? 0 : 1;
}
