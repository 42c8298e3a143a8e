#pragma once

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "churn/dataset.hpp"

namespace churn {

using Timestamp = std::chrono::sys_seconds;
using Day = std::chrono::sys_days;

/// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM:SS" and a trailing "Z".
std::optional<Timestamp> parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp ts);
std::string format_day(Day day);

enum class ActionKind { login, purchase, playtime, levelup };

std::optional<ActionKind> parse_action_kind(std::string_view text);
std::string action_kind_name(ActionKind kind);

/// One raw log record. `value` is the purchase amount, playtime seconds or
/// reached level; unused for logins.
struct ActionEvent {
  std::string player_id;
  Timestamp timestamp;
  ActionKind kind = ActionKind::login;
  double value = 0.0;

  friend bool operator==(const ActionEvent&, const ActionEvent&) = default;
};

struct RejectedLine {
  std::size_t line = 0;
  std::string reason;
};

/// Per-player event streams keyed (and therefore ordered) by player id,
/// each sorted by timestamp. Identical duplicate lines are kept.
struct IngestResult {
  std::map<std::string, std::vector<ActionEvent>> players;
  std::vector<RejectedLine> rejects;
  std::size_t records = 0;
};

/// Log format: header `player_id,timestamp,kind,value`, one event per line.
/// Throws InvalidInput when the log has no records or more than half of
/// them are rejected; IoError when it cannot be read.
IngestResult ingest_logs(std::istream& in, const std::string& source = "log");
IngestResult ingest_logs(const std::filesystem::path& path);

inline constexpr int kChurnGapDays = 9;

struct ChurnLabel {
  bool churned = false;
  Day reference_day;  // date of the last login
};

/// churned = (observation_end date - last login date) >= 9 days. Events
/// after observation_end are ignored; nullopt when there is no login.
std::optional<ChurnLabel> label_churn(std::span<const ActionEvent> events, Timestamp observation_end);

/// Engineered per-player features. Windowed values are daily means; day
/// indices count calendar days (UTC) from the first login.
struct PlayerFeatures {
  double logins_first9 = 0, logins_last9 = 0, logins_lifetime = 0;
  double purchases_first9 = 0, purchases_last9 = 0, purchases_lifetime = 0;
  double playtime_first9 = 0, playtime_last9 = 0, playtime_lifetime = 0;
  double levelups_first9 = 0, levelups_last9 = 0, levelups_lifetime = 0;
  double days_to_first_purchase = 0, first_purchase_day_amount = 0;
  double days_to_last_purchase = 0, last_purchase_day_amount = 0;
  double total_purchases = 0, total_playtime = 0, total_logins = 0, current_level = 1;
  double lifetime_days = 1;
  double days_since_last_purchase = 0;
  double days_since_last_levelup = 0;
  double loyalty_index = 0;
  double purchases_first_9_days = 0;        // amount
  double purchases_first_9_days_count = 0;  // number of purchase events

  friend bool operator==(const PlayerFeatures&, const PlayerFeatures&) = default;
};

/// Column names in export order, matching feature_values().
const std::vector<std::string>& feature_names();
std::vector<double> feature_values(const PlayerFeatures& f);
/// Looks up a feature by export name; throws InvalidInput for unknown names.
double feature_value(const PlayerFeatures& f, const std::string& name);

/// Only events dated between the first and last login (inclusive) and not
/// after observation_end are used. Throws InvalidInput without a login.
PlayerFeatures compute_features(std::span<const ActionEvent> events, Timestamp observation_end);

enum class Outcome { level, playtime };

Outcome parse_outcome(const std::string& name);
std::string outcome_name(Outcome outcome);

/// Predictor columns per model, in a fixed order.
const std::vector<std::string>& predictor_names(Outcome outcome);

struct PlayerRecord {
  std::string player_id;
  PlayerFeatures features;
  ChurnLabel label;
};

struct LabeledDataset {
  Outcome outcome = Outcome::level;
  Dataset data;
};

/// Response: current level (level model) or total playtime seconds
/// (playtime model); event = churned.
LabeledDataset build_dataset(std::span<const PlayerRecord> players, Outcome outcome);

/// Smallest prefix of players by descending total_purchases (ties by id)
/// whose revenue reaches revenue_share of the total. Throws on zero revenue.
std::vector<PlayerRecord> select_top_spenders(std::span<const PlayerRecord> players, double revenue_share);

struct FeaturizeSummary {
  std::size_t players_seen = 0;
  std::size_t excluded_no_login = 0;
  std::size_t cohort = 0;
  std::size_t churned = 0;
  double revenue_total = 0;
  double revenue_cohort = 0;
  double min_cohort_spend = 0;
};

/// ingest -> label -> features (parallel over players) -> top spenders.
std::vector<PlayerRecord> featurize(const IngestResult& logs, Timestamp observation_end,
                                    double revenue_share, std::size_t workers, FeaturizeSummary* summary);

/// Latest event date in the log, used as the default observation end.
Timestamp latest_event_day(const IngestResult& logs);

void write_features_csv(std::span<const PlayerRecord> players, const std::filesystem::path& path,
                        const std::string& fingerprint_comment);

}  // namespace churn
