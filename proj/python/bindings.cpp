#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "churn/baselines.hpp"
#include "churn/cli.hpp"
#include "churn/error.hpp"
#include "churn/evaluation.hpp"
#include "churn/forest.hpp"
#include "churn/rank_stats.hpp"
#include "churn/simulate.hpp"
#include "churn/survival.hpp"

namespace py = pybind11;
using namespace churn;

namespace {

std::vector<SurvivalSample> make_samples(const std::vector<double>& times, const std::vector<bool>& events) {
  if (times.size() != events.size()) throw InvalidInput("times and events differ in length");
  std::vector<SurvivalSample> out(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) out[i] = {times[i], events[i]};
  return out;
}

std::vector<double> unit_weights_if_empty(std::vector<double> w, std::size_t n) {
  if (w.empty()) w.assign(n, 1.0);
  return w;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "churnsurv native core";

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<NumericFailure>(m, "NumericFailure", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<SurvivalCurve>(m, "SurvivalCurve")
      .def(py::init<std::vector<double>, std::vector<double>>(), py::arg("grid"), py::arg("probs"))
      .def_property_readonly("grid", &SurvivalCurve::grid)
      .def_property_readonly("probs", &SurvivalCurve::probs)
      .def("__call__", &SurvivalCurve::operator(), py::arg("t"))
      .def("left_limit", &SurvivalCurve::left_limit, py::arg("t"))
      .def("median", [](const SurvivalCurve& c) { return median_survival(c); })
      .def("__len__", &SurvivalCurve::size)
      .def("__eq__", [](const SurvivalCurve& a, const SurvivalCurve& b) { return a == b; });

  m.def(
      "kaplan_meier",
      [](const std::vector<double>& times, const std::vector<bool>& events, std::vector<double> weights) {
        const auto s = make_samples(times, events);
        return kaplan_meier(s, unit_weights_if_empty(std::move(weights), s.size()));
      },
      py::arg("times"), py::arg("events"), py::arg("weights") = std::vector<double>{});
  m.def(
      "nelson_aalen",
      [](const std::vector<double>& times, const std::vector<bool>& events, std::vector<double> weights) {
        const auto s = make_samples(times, events);
        const auto h = nelson_aalen(s, unit_weights_if_empty(std::move(weights), s.size()));
        return std::make_pair(h.grid(), h.values());
      },
      py::arg("times"), py::arg("events"), py::arg("weights") = std::vector<double>{});
  m.def("median_survival", &median_survival, py::arg("curve"));

  m.def(
      "logrank_scores",
      [](const std::vector<double>& times, const std::vector<bool>& events, std::vector<double> weights) {
        const auto s = make_samples(times, events);
        return logrank_scores(s, unit_weights_if_empty(std::move(weights), s.size()));
      },
      py::arg("times"), py::arg("events"), py::arg("weights") = std::vector<double>{});
  m.def(
      "linear_statistic",
      [](const std::vector<double>& a, const std::vector<double>& x, const std::vector<double>& w) {
        return linear_statistic(a, x, w);
      },
      py::arg("scores"), py::arg("covariate"), py::arg("weights"));
  m.def(
      "conditional_moments",
      [](const std::vector<double>& a, const std::vector<double>& x,
         const std::vector<double>& w) -> std::optional<std::pair<double, double>> {
        const auto mom = conditional_moments(a, x, w);
        if (!mom) return std::nullopt;
        return std::make_pair(mom->mu, mom->sigma2);
      },
      py::arg("scores"), py::arg("covariate"), py::arg("weights"));

  py::class_<VariableTest>(m, "VariableTest")
      .def_readonly("covariate_index", &VariableTest::covariate_index)
      .def_readonly("statistic", &VariableTest::statistic)
      .def_readonly("p_value", &VariableTest::p_value);
  m.def(
      "variable_test",
      [](const std::vector<double>& a, const std::vector<double>& x, const std::vector<double>& w) {
        return variable_test(a, x, w);
      },
      py::arg("scores"), py::arg("covariate"), py::arg("weights"));
  m.def(
      "best_split_point",
      [](const std::vector<double>& a, const std::vector<double>& x, const std::vector<double>& w,
         double min_child_weight) -> std::optional<std::pair<double, double>> {
        const auto sp = best_split_point(a, x, w, min_child_weight);
        if (!sp) return std::nullopt;
        return std::make_pair(sp->threshold, sp->standardized_statistic);
      },
      py::arg("scores"), py::arg("covariate"), py::arg("weights"), py::arg("min_child_weight"));

  py::class_<Dataset>(m, "Dataset")
      .def(py::init([](std::vector<std::string> schema, std::vector<std::vector<double>> columns,
                       const std::vector<double>& times, const std::vector<bool>& events,
                       std::vector<std::string> ids) {
             return Dataset(std::move(schema), std::move(columns), make_samples(times, events), std::move(ids));
           }),
           py::arg("schema"), py::arg("columns"), py::arg("times"), py::arg("events"),
           py::arg("ids") = std::vector<std::string>{})
      .def_property_readonly("schema", &Dataset::schema)
      .def_property_readonly("ids", &Dataset::ids)
      .def_property_readonly("rows", &Dataset::rows)
      .def_property_readonly("times",
                             [](const Dataset& d) {
                               std::vector<double> t;
                               for (const auto& s : d.responses()) t.push_back(s.time);
                               return t;
                             })
      .def_property_readonly("events",
                             [](const Dataset& d) {
                               std::vector<bool> e;
                               for (const auto& s : d.responses()) e.push_back(s.event);
                               return e;
                             })
      .def("row", &Dataset::row);
  m.def("read_dataset_csv", &read_dataset_csv, py::arg("path"));

  py::class_<TreeParams>(m, "TreeParams")
      .def(py::init<>())
      .def_readwrite("alpha", &TreeParams::alpha)
      .def_readwrite("min_node_weight", &TreeParams::min_node_weight)
      .def_readwrite("min_child_weight", &TreeParams::min_child_weight)
      .def_readwrite("mtry", &TreeParams::mtry)
      .def_readwrite("bonferroni", &TreeParams::bonferroni);
  py::class_<ForestParams>(m, "ForestParams")
      .def(py::init<>())
      .def_readwrite("n_trees", &ForestParams::n_trees)
      .def_readwrite("tree", &ForestParams::tree)
      .def_readwrite("subsample_fraction", &ForestParams::subsample_fraction)
      .def_readwrite("master_seed", &ForestParams::master_seed);

  py::class_<SurvivalForest>(m, "SurvivalForest")
      .def_property_readonly("n_trees", &SurvivalForest::size)
      .def_property_readonly("schema", &SurvivalForest::schema)
      .def(
          "predict_curve",
          [](const SurvivalForest& f, const std::vector<double>& x) { return f.predict_curve(x); },
          py::arg("x"))
      .def(
          "predict_batch",
          [](const SurvivalForest& f, const std::vector<std::vector<double>>& players, std::size_t workers) {
            py::gil_scoped_release release;
            return predict_batch(f, players, workers);
          },
          py::arg("players"), py::arg("workers") = 1)
      .def("save", [](const SurvivalForest& f, const std::filesystem::path& p) { save_model(f, p); })
      .def("to_bytes", [](const SurvivalForest& f) {
        const auto bytes = wrap_envelope(ModelKind::forest, f.serialize());
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      });
  m.def("load_model", &load_model, py::arg("path"));

  py::class_<PartialModel>(m, "PartialModel")
      .def_readonly("begin", &PartialModel::begin)
      .def_readonly("end", &PartialModel::end);

  m.def(
      "train_forest",
      [](const Dataset& d, const ForestParams& p, std::size_t workers) {
        py::gil_scoped_release release;
        return train_forest(d, p, workers);
      },
      py::arg("dataset"), py::arg("params"), py::arg("workers") = 1);
  m.def(
      "train_partial",
      [](const Dataset& d, const ForestParams& p, std::size_t begin, std::size_t end, std::size_t workers) {
        py::gil_scoped_release release;
        return train_partial(d, p, begin, end, workers);
      },
      py::arg("dataset"), py::arg("params"), py::arg("begin"), py::arg("end"), py::arg("workers") = 1);
  m.def(
      "merge_partials", [](const std::vector<PartialModel>& parts) { return merge_partials(parts); },
      py::arg("partials"));

  py::class_<CoxModel>(m, "CoxModel")
      .def_readonly("schema", &CoxModel::schema)
      .def_readonly("beta", &CoxModel::beta)
      .def_readonly("covariate_means", &CoxModel::covariate_means)
      .def_readonly("iterations", &CoxModel::iterations)
      .def("predict_curve", [](const CoxModel& c, const std::vector<double>& x) { return cox_predict_curve(c, x); });
  m.def("fit_cox", [](const Dataset& d) { return fit_cox(d); }, py::arg("dataset"));

  py::class_<KmModel>(m, "KmModel")
      .def_readonly("curve", &KmModel::curve)
      .def("predict_curve", [](const KmModel& k, const std::vector<double>& x) { return km_predict_curve(k, x); });
  m.def("fit_km_baseline", &fit_km_baseline, py::arg("dataset"));

  m.def(
      "censoring_km",
      [](const std::vector<double>& times, const std::vector<bool>& events) {
        return censoring_km(make_samples(times, events));
      },
      py::arg("times"), py::arg("events"));
  m.def(
      "brier_score",
      [](const std::vector<SurvivalCurve>& curves, const std::vector<double>& times, const std::vector<bool>& events,
         double t) {
        const auto s = make_samples(times, events);
        return brier_score(curves, s, t, censoring_km(s));
      },
      py::arg("curves"), py::arg("times"), py::arg("events"), py::arg("t"));
  m.def(
      "integrated_brier",
      [](const std::vector<SurvivalCurve>& curves, const std::vector<double>& times, const std::vector<bool>& events,
         double t_max, std::size_t grid_size) {
        return integrated_brier(curves, make_samples(times, events), t_max, grid_size);
      },
      py::arg("curves"), py::arg("times"), py::arg("events"), py::arg("t_max"), py::arg("grid_size") = 100);

  m.def(
      "simulate",
      [](const std::filesystem::path& out, std::size_t players, std::uint64_t seed, const std::string& scenario) {
        SimulationConfig c;
        c.players = players;
        c.seed = seed;
        c.scenario = parse_scenario(scenario);
        py::gil_scoped_release release;
        simulate_logs(c, out);
      },
      py::arg("out"), py::arg("players"), py::arg("seed"), py::arg("scenario") = "nonlinear");
  m.def(
      "featurize",
      [](const std::filesystem::path& logs, const std::filesystem::path& out, double revenue_share) {
        cli::FeaturizeOptions o;
        o.logs = logs;
        o.out = out;
        o.revenue_share = revenue_share;
        FeaturizeSummary s;
        {
          py::gil_scoped_release release;
          s = cli::run_featurize(o);
        }
        return py::make_tuple(s.players_seen, s.cohort, s.churned);
      },
      py::arg("logs"), py::arg("out"), py::arg("revenue_share") = 0.5);
  m.def(
      "evaluate",
      [](std::optional<std::filesystem::path> level, std::optional<std::filesystem::path> playtime,
         const std::filesystem::path& out, std::size_t n_trees, std::uint64_t seed, std::size_t workers) {
        cli::EvaluateOptions o;
        o.level_data = std::move(level);
        o.playtime_data = std::move(playtime);
        o.out = out;
        o.forest.n_trees = n_trees;
        o.forest.master_seed = seed;
        o.seed = seed;
        o.workers = workers;
        std::vector<cli::EvaluationRow> rows;
        {
          py::gil_scoped_release release;
          rows = cli::run_evaluate(o);
        }
        py::dict table;
        for (const auto& r : rows) table[py::make_tuple(outcome_name(r.outcome), r.entry.model)] = r.headline;
        return table;
      },
      py::arg("level_data"), py::arg("playtime_data"), py::arg("out"), py::arg("n_trees") = 300,
      py::arg("seed") = 0, py::arg("workers") = 1);
}
