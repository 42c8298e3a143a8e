#include "churn/simulate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "churn/csv.hpp"
#include "churn/error.hpp"
#include "churn/parallel.hpp"
#include "churn/random.hpp"

namespace churn {

Scenario parse_scenario(const std::string& name) {
  if (name == "nonlinear") return Scenario::nonlinear;
  if (name == "linear") return Scenario::linear;
  throw InvalidInput("unknown scenario '" + name + "' (expected nonlinear or linear)");
}

std::string scenario_name(Scenario scenario) {
  return scenario == Scenario::nonlinear ? "nonlinear" : "linear";
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

constexpr std::array<int, 7> kWalls = {10, 20, 35, 50, 70, 90, 120};

bool is_wall(int level) { return std::find(kWalls.begin(), kWalls.end(), level) != kWalls.end(); }

// Generator parameters (simulator version 1).
constexpr double kJoinFraction = 0.2;       // players join during the first fifth of the window
constexpr double kSpendCorrelation = 0.3;   // corr(engagement, spend)
constexpr double kSpeedSd = 0.3;            // log-sd of the unobserved leveling speed
constexpr double kSessionSd = 0.2;          // log-sd of a day's session around its mean
constexpr double kPurchaseProb = 0.3775406687981454;  // sigmoid(-0.5)
constexpr double kAmountSd = 0.2;
constexpr double kDailyQuit = 0.001;
// nonlinear scenario
constexpr double kLevelCost = 1500.0;       // seconds per level
constexpr double kWallFactor = 5.0;         // cost multiplier at wall levels
constexpr double kProgressPerCurrency = 100.0;
constexpr double kEngagementCut = 0.5;
constexpr double kEarlyWallQuit = 0.2;      // walls up to 35, less engaged players
constexpr double kLateWallQuit = 0.6;       // walls from 50, engaged players burn out
// linear scenario
constexpr double kLinearLevelCost = 6000.0;

}  // namespace

std::vector<ActionEvent> simulate_player(const SimulationConfig& config, std::size_t index) {
  Rng rng(hash_combine(config.seed, index));
  const bool nonlinear = config.scenario == Scenario::nonlinear;

  char id_buf[32];
  std::snprintf(id_buf, sizeof id_buf, "p%06zu", index);
  const std::string id = id_buf;

  const auto join_days = static_cast<std::uint64_t>(std::max(1.0, config.window_days * kJoinFraction));
  const auto join = static_cast<int>(rng.below(join_days));
  const double engagement = rng.normal();
  const double spend =
      kSpendCorrelation * engagement + std::sqrt(1.0 - kSpendCorrelation * kSpendCorrelation) * rng.normal();
  const double p_login = std::clamp(sigmoid(0.8 + 1.2 * engagement), 0.25, 0.98);
  // Nonlinear: the most and least engaged players both play short sessions.
  const double session_mean = nonlinear ? 2400.0 * std::exp(-0.8 * engagement * engagement)
                                        : 2400.0 * std::exp(0.35 * engagement);
  const double spend_scale = std::exp(2.0 + 0.1 * spend);
  const double speed = std::exp(kSpeedSd * rng.normal());
  auto cost = [&](int lv) {
    if (!nonlinear) return kLinearLevelCost / speed;
    return kLevelCost * (is_wall(lv) ? kWallFactor : 1.0) / speed;
  };

  std::vector<ActionEvent> events;
  int level = 1;
  double progress = 0.0;  // playtime accumulated inside the current level
  bool quitting = false;
  for (int d = join; d < config.window_days && !quitting; ++d) {
    if (!rng.bernoulli(p_login)) continue;
    const Timestamp day_start{config.start + std::chrono::days{d}};
    const auto login_at = day_start + std::chrono::seconds{static_cast<long long>(rng.below(70000))};
    events.push_back({id, login_at, ActionKind::login, 0.0});

    const double session =
        std::round(session_mean * std::exp(kSessionSd * rng.normal() - kSessionSd * kSessionSd / 2));
    events.push_back({id, login_at + std::chrono::seconds{60}, ActionKind::playtime, session});

    const bool stuck = nonlinear && is_wall(level);
    if (rng.bernoulli(stuck ? 2.0 * kPurchaseProb : kPurchaseProb)) {
      const double amount =
          std::round(100.0 * spend_scale * std::exp(kAmountSd * rng.normal() - kAmountSd * kAmountSd / 2)) / 100.0;
      events.push_back({id, login_at + std::chrono::seconds{120}, ActionKind::purchase, std::max(0.01, amount)});
      if (nonlinear) progress += kProgressPerCurrency * amount;
    }

    progress += session;
    int ups = 0;
    while (progress >= cost(level)) {
      progress -= cost(level);
      ++level;
      ++ups;
      events.push_back(
          {id, login_at + std::chrono::seconds{180 + ups}, ActionKind::levelup, static_cast<double>(level)});
      double quit;
      if (nonlinear) {
        quit = 0.01;
        if (is_wall(level)) {
          if (level <= 35 && engagement < kEngagementCut) quit += kEarlyWallQuit;
          if (level >= 50 && engagement >= kEngagementCut) quit += kLateWallQuit;
        }
      } else {
        quit = std::min(0.9, 0.03 * std::exp(-0.6 * engagement - 0.5 * spend));
      }
      if (rng.bernoulli(quit)) {
        quitting = true;
        break;
      }
    }
    if (!quitting && rng.bernoulli(kDailyQuit)) quitting = true;
  }
  return events;
}

void simulate_logs(const SimulationConfig& config, std::ostream& out, std::size_t workers) {
  if (config.players < 1) throw InvalidInput("simulation needs at least one player");
  if (config.window_days < 30) throw InvalidInput("simulation window must span at least 30 days");
  std::vector<std::vector<ActionEvent>> per_player(config.players);
  parallel_for(config.players, workers, [&](std::size_t i) { per_player[i] = simulate_player(config, i); });

  struct Ref {
    Timestamp ts;
    std::uint32_t player;
    std::uint32_t seq;
  };
  std::vector<Ref> refs;
  for (std::size_t i = 0; i < per_player.size(); ++i)
    for (std::size_t k = 0; k < per_player[i].size(); ++k)
      refs.push_back({per_player[i][k].timestamp, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(k)});
  std::sort(refs.begin(), refs.end(), [](const Ref& a, const Ref& b) {
    if (a.ts != b.ts) return a.ts < b.ts;
    if (a.player != b.player) return a.player < b.player;
    return a.seq < b.seq;
  });

  out << "player_id,timestamp,kind,value\n";
  for (const auto& r : refs) {
    const ActionEvent& e = per_player[r.player][r.seq];
    out << e.player_id << ',' << format_timestamp(e.timestamp) << ',' << action_kind_name(e.kind) << ',';
    if (e.kind != ActionKind::login) out << csv::format_double(e.value);
    out << '\n';
  }
}

void simulate_logs(const SimulationConfig& config, const std::filesystem::path& path, std::size_t workers) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  simulate_logs(config, out, workers);
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace churn
