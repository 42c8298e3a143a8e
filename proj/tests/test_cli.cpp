#include <doctest.h>

#include <fstream>
#include <sstream>

#include <unistd.h>

#include "churn/cli.hpp"
#include "churn/error.hpp"

using namespace churn;
using namespace churn::cli;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("churn_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

}  // namespace

TEST_CASE("index ranges are half-open a..b") {
  const auto r = parse_index_range("10..25");
  CHECK(r.begin == 10);
  CHECK(r.end == 25);
  CHECK_THROWS_AS(parse_index_range("10-25"), InvalidInput);
  CHECK_THROWS_AS(parse_index_range("a..b"), InvalidInput);
  CHECK_THROWS_AS(parse_index_range("-1..3"), InvalidInput);
}

TEST_CASE("simulate, featurize, train, merge, predict and evaluate end to end") {
  TempDir tmp;
  SimulateOptions sim;
  sim.config.players = 800;
  sim.config.seed = 3;
  sim.out = tmp.path / "logs.csv";
  run_simulate(sim);
  CHECK(first_line(sim.out) == "player_id,timestamp,kind,value");

  FeaturizeOptions feat;
  feat.logs = sim.out;
  feat.out = tmp.path / "features";
  feat.resolved_config = "test";
  const auto summary = run_featurize(feat);
  CHECK(summary.players_seen == 800);
  CHECK(summary.cohort > 50);
  CHECK(summary.revenue_cohort >= 0.5 * summary.revenue_total);
  CHECK(first_line(feat.out / "level.csv").rfind("# churn featurize", 0) == 0);

  TrainOptions train;
  train.data = feat.out / "level.csv";
  train.forest.n_trees = 12;
  train.forest.master_seed = 5;
  train.out = tmp.path / "full.bin";
  CHECK(run_train(train).find("trees: 12") != std::string::npos);

  train.partial = IndexRange{0, 5};
  train.out = tmp.path / "p0.bin";
  run_train(train);
  train.partial = IndexRange{5, 12};
  train.workers = 3;
  train.out = tmp.path / "p1.bin";
  run_train(train);
  run_merge({tmp.path / "p1.bin", tmp.path / "p0.bin"}, tmp.path / "merged.bin");
  CHECK(read_file(tmp.path / "merged.bin") == read_file(tmp.path / "full.bin"));
  CHECK_THROWS_AS(run_merge({tmp.path / "p1.bin"}, tmp.path / "bad.bin"), InvalidInput);

  PredictOptions pred;
  pred.model = tmp.path / "merged.bin";
  pred.players = feat.out / "level.csv";
  pred.out = tmp.path / "pred";
  run_predict(pred);
  std::ifstream med(pred.out / "medians.csv");
  std::string line;
  std::getline(med, line);
  std::getline(med, line);
  CHECK(line == "player_id,median");

  // Playtime predictors do not match a level model.
  pred.players = feat.out / "playtime.csv";
  CHECK_THROWS_AS(run_predict(pred), InvalidInput);

  EvaluateOptions eval;
  eval.level_data = feat.out / "level.csv";
  eval.playtime_data = feat.out / "playtime.csv";
  eval.forest.n_trees = 20;
  eval.out = tmp.path / "eval";
  const auto rows = run_evaluate(eval);
  CHECK(rows.size() == 6);
  for (const auto& r : rows) {
    CHECK(r.headline > 0.0);
    CHECK(r.headline < 0.5);
  }
  for (const char* f : {"ibs_table.csv", "ibs_detail.csv", "brier_curves.csv"})
    CHECK(fs::exists(eval.out / f));
}

TEST_CASE("exceptions map to exit codes") {
  auto code = [](auto thrower) {
    try {
      thrower();
    } catch (...) {
      return exit_code_for_current_exception();
    }
    return 0;
  };
  CHECK(code([] { throw InvalidInput("x"); }) == kInvalidInput);
  CHECK(code([] { throw EvaluationHorizonError("x"); }) == kInvalidInput);
  CHECK(code([] { throw NumericFailure("x"); }) == kNumericFailure);
  CHECK(code([] { throw CorruptModel("x"); }) == kIoFailure);
}
