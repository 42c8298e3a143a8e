#include "churn/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "churn/csv.hpp"
#include "churn/error.hpp"
#include "churn/parallel.hpp"

namespace churn {

namespace chr = std::chrono;

namespace {

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  text = csv::trim(text);
  if (!text.empty() && text.back() == 'Z') text.remove_suffix(1);
  if (text.size() != 10 && text.size() != 19) return std::nullopt;
  if (text[4] != '-' || text[7] != '-') return std::nullopt;
  int y, m, d, hh = 0, mm = 0, ss = 0;
  if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), m) || !parse_int(text.substr(8, 2), d))
    return std::nullopt;
  if (text.size() == 19) {
    if ((text[10] != 'T' && text[10] != ' ') || text[13] != ':' || text[16] != ':') return std::nullopt;
    if (!parse_int(text.substr(11, 2), hh) || !parse_int(text.substr(14, 2), mm) ||
        !parse_int(text.substr(17, 2), ss))
      return std::nullopt;
    if (hh > 23 || mm > 59 || ss > 59 || hh < 0 || mm < 0 || ss < 0) return std::nullopt;
  }
  const chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(m)},
                                chr::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return Timestamp{chr::sys_days{ymd}} + chr::hours{hh} + chr::minutes{mm} + chr::seconds{ss};
}

std::string format_day(Day day) {
  const chr::year_month_day ymd{day};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_timestamp(Timestamp ts) {
  const Day day = chr::floor<chr::days>(ts);
  const chr::hh_mm_ss hms{ts - day};
  char buf[16];
  std::snprintf(buf, sizeof buf, "T%02d:%02d:%02dZ", static_cast<int>(hms.hours().count()),
                static_cast<int>(hms.minutes().count()), static_cast<int>(hms.seconds().count()));
  return format_day(day) + buf;
}

std::optional<ActionKind> parse_action_kind(std::string_view text) {
  text = csv::trim(text);
  if (text == "login") return ActionKind::login;
  if (text == "purchase") return ActionKind::purchase;
  if (text == "playtime") return ActionKind::playtime;
  if (text == "levelup") return ActionKind::levelup;
  return std::nullopt;
}

std::string action_kind_name(ActionKind kind) {
  switch (kind) {
    case ActionKind::login: return "login";
    case ActionKind::purchase: return "purchase";
    case ActionKind::playtime: return "playtime";
    case ActionKind::levelup: return "levelup";
  }
  return "?";
}

namespace {

// Returns an empty string on success, otherwise the rejection reason.
std::string parse_event(const std::string& line, ActionEvent& ev) {
  const auto fields = csv::split(line);
  if (fields.size() != 4) return "expected 4 fields, found " + std::to_string(fields.size());
  const auto id = csv::trim(fields[0]);
  if (id.empty()) return "empty player_id";
  const auto ts = parse_timestamp(fields[1]);
  if (!ts) return "invalid timestamp '" + fields[1] + "'";
  const auto kind = parse_action_kind(fields[2]);
  if (!kind) return "unknown event kind '" + fields[2] + "'";
  ev.player_id = std::string(id);
  ev.timestamp = *ts;
  ev.kind = *kind;
  ev.value = 0.0;
  const auto raw = csv::trim(fields[3]);
  if (*kind == ActionKind::login) {
    if (!raw.empty()) {
      try {
        ev.value = csv::parse_double(raw, "value");
      } catch (const InvalidInput&) {
        return "invalid login value '" + std::string(raw) + "'";
      }
    }
    return {};
  }
  double v;
  try {
    v = csv::parse_double(raw, "value");
  } catch (const InvalidInput&) {
    return "invalid value '" + std::string(raw) + "'";
  }
  switch (*kind) {
    case ActionKind::purchase:
      if (v < 0.0) return "negative purchase amount";
      break;
    case ActionKind::playtime:
      if (v < 0.0) return "negative playtime";
      break;
    case ActionKind::levelup:
      if (!(v >= 1.0) || v != std::floor(v)) return "level must be a positive integer";
      break;
    case ActionKind::login: break;
  }
  ev.value = v;
  return {};
}

}  // namespace

IngestResult ingest_logs(std::istream& in, const std::string& source) {
  IngestResult result;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      header_seen = true;
      const auto h = csv::split(line);
      if (h.size() == 4 && csv::trim(h[0]) == "player_id" && csv::trim(h[1]) == "timestamp" &&
          csv::trim(h[2]) == "kind" && csv::trim(h[3]) == "value")
        continue;
      throw InvalidInput(source + ": header must be player_id,timestamp,kind,value");
    }
    ++result.records;
    ActionEvent ev;
    const std::string reason = parse_event(line, ev);
    if (!reason.empty()) {
      result.rejects.push_back({line_no, reason});
      continue;
    }
    result.players[ev.player_id].push_back(std::move(ev));
  }
  if (in.bad()) throw IoError("failed reading " + source);
  if (result.records == 0) throw InvalidInput(source + ": event log is empty");
  if (2 * result.rejects.size() > result.records)
    throw InvalidInput(source + ": " + std::to_string(result.rejects.size()) + " of " +
                       std::to_string(result.records) + " records rejected (first: line " +
                       std::to_string(result.rejects.front().line) + ", " + result.rejects.front().reason + ")");
  for (auto& [id, events] : result.players)
    std::stable_sort(events.begin(), events.end(),
                     [](const ActionEvent& a, const ActionEvent& b) { return a.timestamp < b.timestamp; });
  return result;
}

IngestResult ingest_logs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return ingest_logs(in, path.string());
}

namespace {

Day day_of(Timestamp ts) { return chr::floor<chr::days>(ts); }

}  // namespace

std::optional<ChurnLabel> label_churn(std::span<const ActionEvent> events, Timestamp observation_end) {
  std::optional<Day> last;
  for (const auto& e : events) {
    if (e.kind != ActionKind::login || e.timestamp > observation_end) continue;
    const Day d = day_of(e.timestamp);
    if (!last || d > *last) last = d;
  }
  if (!last) return std::nullopt;
  const auto gap = (day_of(observation_end) - *last).count();
  return ChurnLabel{gap >= kChurnGapDays, *last};
}

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = {
      "logins_first9",          "logins_last9",          "logins_lifetime",
      "purchases_first9",       "purchases_last9",       "purchases_lifetime",
      "playtime_first9",        "playtime_last9",        "playtime_lifetime",
      "levelups_first9",        "levelups_last9",        "levelups_lifetime",
      "days_to_first_purchase", "first_purchase_amount", "days_to_last_purchase",
      "last_purchase_amount",   "total_purchases",       "total_playtime",
      "total_logins",           "level",                 "lifetime",
      "days_since_last_purchase", "days_since_last_levelup", "loyalty_index",
      "purchases_first_9_days", "purchases_first_9_days_count"};
  return names;
}

std::vector<double> feature_values(const PlayerFeatures& f) {
  return {f.logins_first9,          f.logins_last9,           f.logins_lifetime,
          f.purchases_first9,       f.purchases_last9,        f.purchases_lifetime,
          f.playtime_first9,        f.playtime_last9,         f.playtime_lifetime,
          f.levelups_first9,        f.levelups_last9,         f.levelups_lifetime,
          f.days_to_first_purchase, f.first_purchase_day_amount, f.days_to_last_purchase,
          f.last_purchase_day_amount, f.total_purchases,      f.total_playtime,
          f.total_logins,           f.current_level,          f.lifetime_days,
          f.days_since_last_purchase, f.days_since_last_levelup, f.loyalty_index,
          f.purchases_first_9_days, f.purchases_first_9_days_count};
}

double feature_value(const PlayerFeatures& f, const std::string& name) {
  const auto& names = feature_names();
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InvalidInput("unknown feature '" + name + "'");
  return feature_values(f)[static_cast<std::size_t>(it - names.begin())];
}

PlayerFeatures compute_features(std::span<const ActionEvent> events, Timestamp observation_end) {
  std::optional<Day> first, last;
  for (const auto& e : events) {
    if (e.kind != ActionKind::login || e.timestamp > observation_end) continue;
    const Day d = day_of(e.timestamp);
    if (!first || d < *first) first = d;
    if (!last || d > *last) last = d;
  }
  if (!first) throw InvalidInput("player has no login events");

  const auto lifetime = static_cast<std::size_t>((*last - *first).count() + 1);
  std::vector<double> logins(lifetime, 0.0), purchases(lifetime, 0.0), playtime(lifetime, 0.0),
      levelups(lifetime, 0.0), purchase_count(lifetime, 0.0);
  double level = 1.0;
  std::optional<std::size_t> last_levelup;
  for (const auto& e : events) {
    if (e.timestamp > observation_end) continue;
    const Day d = day_of(e.timestamp);
    if (d < *first || d > *last) continue;
    const auto idx = static_cast<std::size_t>((d - *first).count());
    switch (e.kind) {
      case ActionKind::login: logins[idx] += 1.0; break;
      case ActionKind::purchase:
        purchases[idx] += e.value;
        purchase_count[idx] += 1.0;
        break;
      case ActionKind::playtime: playtime[idx] += e.value; break;
      case ActionKind::levelup:
        levelups[idx] += 1.0;
        level = std::max(level, e.value);
        if (!last_levelup || idx > *last_levelup) last_levelup = idx;
        break;
    }
  }

  const std::size_t head_end = std::min<std::size_t>(9, lifetime);
  const std::size_t tail_begin = lifetime > 9 ? lifetime - 9 : 0;
  auto window = [&](const std::vector<double>& daily, std::size_t b, std::size_t e) {
    double s = 0.0;
    for (std::size_t k = b; k < e; ++k) s += daily[k];
    return s;
  };
  const double L = static_cast<double>(lifetime);

  PlayerFeatures f;
  f.lifetime_days = L;
  f.logins_first9 = window(logins, 0, head_end) / 9.0;
  f.logins_last9 = window(logins, tail_begin, lifetime) / 9.0;
  f.logins_lifetime = window(logins, 0, lifetime) / L;
  f.purchases_first9 = window(purchases, 0, head_end) / 9.0;
  f.purchases_last9 = window(purchases, tail_begin, lifetime) / 9.0;
  f.purchases_lifetime = window(purchases, 0, lifetime) / L;
  f.playtime_first9 = window(playtime, 0, head_end) / 9.0;
  f.playtime_last9 = window(playtime, tail_begin, lifetime) / 9.0;
  f.playtime_lifetime = window(playtime, 0, lifetime) / L;
  f.levelups_first9 = window(levelups, 0, head_end) / 9.0;
  f.levelups_last9 = window(levelups, tail_begin, lifetime) / 9.0;
  f.levelups_lifetime = window(levelups, 0, lifetime) / L;

  std::optional<std::size_t> first_purchase, last_purchase;
  for (std::size_t k = 0; k < lifetime; ++k) {
    if (purchase_count[k] > 0.0) {
      if (!first_purchase) first_purchase = k;
      last_purchase = k;
    }
  }
  if (first_purchase) {
    f.days_to_first_purchase = static_cast<double>(*first_purchase);
    f.first_purchase_day_amount = purchases[*first_purchase];
    f.days_to_last_purchase = static_cast<double>(*last_purchase);
    f.last_purchase_day_amount = purchases[*last_purchase];
    f.days_since_last_purchase = static_cast<double>(lifetime - 1 - *last_purchase);
  } else {
    f.days_to_first_purchase = L;
    f.days_to_last_purchase = L;
    f.days_since_last_purchase = L;
  }
  f.days_since_last_levelup = last_levelup ? static_cast<double>(lifetime - 1 - *last_levelup) : L;
  f.total_purchases = window(purchases, 0, lifetime);
  f.total_playtime = window(playtime, 0, lifetime);
  f.total_logins = window(logins, 0, lifetime);
  f.current_level = level;
  const auto login_days = std::count_if(logins.begin(), logins.end(), [](double c) { return c > 0.0; });
  f.loyalty_index = static_cast<double>(login_days) / L;
  f.purchases_first_9_days = window(purchases, 0, head_end);
  f.purchases_first_9_days_count = window(purchase_count, 0, head_end);
  return f;
}

Outcome parse_outcome(const std::string& name) {
  if (name == "level") return Outcome::level;
  if (name == "playtime") return Outcome::playtime;
  throw InvalidInput("unknown model kind '" + name + "' (expected level or playtime)");
}

std::string outcome_name(Outcome outcome) { return outcome == Outcome::level ? "level" : "playtime"; }

const std::vector<std::string>& predictor_names(Outcome outcome) {
  static const std::vector<std::string> playtime = {
      "level",         "days_since_last_purchase", "first_purchase_amount",  "last_purchase_amount",
      "purchases_first_9_days", "loyalty_index",   "days_since_last_levelup"};
  static const std::vector<std::string> level = {
      "lifetime",      "days_since_last_purchase", "first_purchase_amount",  "last_purchase_amount",
      "purchases_first_9_days", "loyalty_index",   "days_since_last_levelup"};
  return outcome == Outcome::level ? level : playtime;
}

LabeledDataset build_dataset(std::span<const PlayerRecord> players, Outcome outcome) {
  const auto& schema = predictor_names(outcome);
  std::vector<std::vector<double>> columns(schema.size());
  std::vector<SurvivalSample> responses;
  std::vector<std::string> ids;
  for (const auto& p : players) {
    for (std::size_t j = 0; j < schema.size(); ++j) columns[j].push_back(feature_value(p.features, schema[j]));
    const double t = outcome == Outcome::level ? p.features.current_level : p.features.total_playtime;
    responses.push_back({t, p.label.churned});
    ids.push_back(p.player_id);
  }
  return LabeledDataset{outcome, Dataset(schema, std::move(columns), std::move(responses), std::move(ids))};
}

std::vector<PlayerRecord> select_top_spenders(std::span<const PlayerRecord> players, double revenue_share) {
  if (!(revenue_share > 0.0 && revenue_share <= 1.0)) throw InvalidInput("revenue share must lie in (0, 1]");
  std::vector<const PlayerRecord*> sorted;
  for (const auto& p : players) sorted.push_back(&p);
  std::stable_sort(sorted.begin(), sorted.end(), [](const PlayerRecord* a, const PlayerRecord* b) {
    if (a->features.total_purchases != b->features.total_purchases)
      return a->features.total_purchases > b->features.total_purchases;
    return a->player_id < b->player_id;
  });
  double total = 0.0;
  for (const auto* p : sorted) total += p->features.total_purchases;
  if (!(total > 0.0)) throw InvalidInput("total revenue is zero; cannot select top spenders");
  const double target = revenue_share * total;
  std::vector<PlayerRecord> out;
  double running = 0.0;
  for (const auto* p : sorted) {
    if (running >= target || !(p->features.total_purchases > 0.0)) break;
    running += p->features.total_purchases;
    out.push_back(*p);
  }
  return out;
}

Timestamp latest_event_day(const IngestResult& logs) {
  std::optional<Timestamp> latest;
  for (const auto& [id, events] : logs.players)
    for (const auto& e : events)
      if (!latest || e.timestamp > *latest) latest = e.timestamp;
  if (!latest) throw InvalidInput("event log has no valid events");
  return Timestamp{day_of(*latest)} + chr::hours{24} - chr::seconds{1};
}

std::vector<PlayerRecord> featurize(const IngestResult& logs, Timestamp observation_end, double revenue_share,
                                    std::size_t workers, FeaturizeSummary* summary) {
  std::vector<const std::pair<const std::string, std::vector<ActionEvent>>*> entries;
  for (const auto& entry : logs.players) entries.push_back(&entry);
  std::vector<std::optional<PlayerRecord>> records(entries.size());
  parallel_for(entries.size(), workers, [&](std::size_t i) {
    const auto& [id, events] = *entries[i];
    const auto label = label_churn(events, observation_end);
    if (!label) return;
    records[i] = PlayerRecord{id, compute_features(events, observation_end), *label};
  });
  std::vector<PlayerRecord> all;
  FeaturizeSummary s;
  s.players_seen = entries.size();
  for (auto& r : records) {
    if (!r) {
      ++s.excluded_no_login;
      continue;
    }
    s.revenue_total += r->features.total_purchases;
    all.push_back(std::move(*r));
  }
  auto cohort = select_top_spenders(all, revenue_share);
  s.cohort = cohort.size();
  for (const auto& p : cohort) {
    s.churned += p.label.churned ? 1 : 0;
    s.revenue_cohort += p.features.total_purchases;
  }
  s.min_cohort_spend = cohort.empty() ? 0.0 : cohort.back().features.total_purchases;
  if (summary) *summary = s;
  return cohort;
}

void write_features_csv(std::span<const PlayerRecord> players, const std::filesystem::path& path,
                        const std::string& fingerprint_comment) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# " << fingerprint_comment << '\n';
  out << "player_id,churned,last_login_day";
  for (const auto& name : feature_names()) out << ',' << name;
  out << '\n';
  for (const auto& p : players) {
    out << p.player_id << ',' << (p.label.churned ? 1 : 0) << ',' << format_day(p.label.reference_day);
    for (double v : feature_values(p.features)) out << ',' << csv::format_double(v);
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace churn
