#include "churn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "churn/csv.hpp"
#include "churn/error.hpp"

namespace churn {

Dataset::Dataset(std::vector<std::string> schema, std::vector<std::vector<double>> columns,
                 std::vector<SurvivalSample> responses, std::vector<std::string> ids)
    : schema_(std::move(schema)),
      columns_(std::move(columns)),
      responses_(std::move(responses)),
      ids_(std::move(ids)) {
  if (schema_.size() != columns_.size())
    throw InvalidInput("dataset schema and column count differ");
  for (const auto& c : columns_) {
    if (c.size() != responses_.size())
      throw InvalidInput("dataset covariate column length differs from response count");
    for (double v : c)
      if (!std::isfinite(v)) throw InvalidInput("dataset covariates must be finite");
  }
  for (const auto& s : responses_) validate_sample(s);
  if (ids_.empty()) {
    ids_.reserve(responses_.size());
    for (std::size_t i = 0; i < responses_.size(); ++i) ids_.push_back(std::to_string(i));
  } else if (ids_.size() != responses_.size()) {
    throw InvalidInput("dataset id count differs from response count");
  }
}

std::vector<double> Dataset::row(std::size_t i) const {
  std::vector<double> out(cols());
  for (std::size_t j = 0; j < cols(); ++j) out[j] = columns_[j][i];
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  std::vector<std::vector<double>> cols(columns_.size());
  std::vector<SurvivalSample> resp;
  std::vector<std::string> ids;
  resp.reserve(rows.size());
  ids.reserve(rows.size());
  for (auto& c : cols) c.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= responses_.size()) throw InvalidInput("dataset subset row out of range");
    for (std::size_t j = 0; j < columns_.size(); ++j) cols[j].push_back(columns_[j][r]);
    resp.push_back(responses_[r]);
    ids.push_back(ids_[r]);
  }
  return Dataset(schema_, std::move(cols), std::move(resp), std::move(ids));
}

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    return true;
  }
  return false;
}

}  // namespace

Dataset read_dataset_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!next_data_line(in, line)) throw InvalidInput(path.string() + ": missing header");
  const auto header = csv::split(line);
  if (header.size() < 3 || header[0] != "player_id" || header[1] != "time" || header[2] != "event")
    throw InvalidInput(path.string() + ": header must start with player_id,time,event");
  std::vector<std::string> schema(header.begin() + 3, header.end());
  std::vector<std::vector<double>> columns(schema.size());
  std::vector<SurvivalSample> responses;
  std::vector<std::string> ids;
  std::size_t line_no = 1;
  while (next_data_line(in, line)) {
    ++line_no;
    const auto fields = csv::split(line);
    if (fields.size() != header.size())
      throw InvalidInput(path.string() + ": row " + std::to_string(line_no) + " has " +
                         std::to_string(fields.size()) + " fields, expected " +
                         std::to_string(header.size()));
    ids.push_back(fields[0]);
    const double t = csv::parse_double(fields[1], "time");
    const double e = csv::parse_double(fields[2], "event");
    if (e != 0.0 && e != 1.0) throw InvalidInput(path.string() + ": event must be 0 or 1");
    responses.push_back({t, e == 1.0});
    for (std::size_t j = 0; j < schema.size(); ++j)
      columns[j].push_back(csv::parse_double(fields[3 + j], schema[j]));
  }
  return Dataset(std::move(schema), std::move(columns), std::move(responses), std::move(ids));
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path,
                       const std::string& fingerprint_comment) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# " << fingerprint_comment << '\n';
  out << "player_id,time,event";
  for (const auto& name : data.schema()) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < data.rows(); ++i) {
    out << data.ids()[i] << ',' << csv::format_double(data.responses()[i].time) << ','
        << (data.responses()[i].event ? 1 : 0);
    for (std::size_t j = 0; j < data.cols(); ++j) out << ',' << csv::format_double(data.at(i, j));
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

PlayerTable read_player_table(const std::filesystem::path& path,
                              std::span<const std::string> required_schema) {
  auto in = open_input(path);
  std::string line;
  if (!next_data_line(in, line)) throw InvalidInput(path.string() + ": missing header");
  const auto header = csv::split(line);
  if (header.empty() || header[0] != "player_id")
    throw InvalidInput(path.string() + ": header must start with player_id");
  std::vector<std::size_t> positions;
  std::string missing;
  for (const auto& name : required_schema) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      missing += (missing.empty() ? "" : ", ") + name;
      continue;
    }
    positions.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  if (!missing.empty())
    throw InvalidInput(path.string() + ": schema mismatch, missing columns: " + missing);
  PlayerTable table;
  table.schema.assign(required_schema.begin(), required_schema.end());
  std::size_t line_no = 1;
  while (next_data_line(in, line)) {
    ++line_no;
    const auto fields = csv::split(line);
    if (fields.size() != header.size())
      throw InvalidInput(path.string() + ": row " + std::to_string(line_no) +
                         " has the wrong number of fields");
    table.ids.push_back(fields[0]);
    std::vector<double> row;
    row.reserve(positions.size());
    for (std::size_t k = 0; k < positions.size(); ++k)
      row.push_back(csv::parse_double(fields[positions[k]], required_schema[k]));
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace churn
