#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "churn/survival.hpp"

namespace churn {

/// Covariates (column-major) plus one SurvivalSample per row.
class Dataset {
 public:
  Dataset() = default;
  /// `columns[j][i]` is covariate j of row i.
  Dataset(std::vector<std::string> schema, std::vector<std::vector<double>> columns,
          std::vector<SurvivalSample> responses, std::vector<std::string> ids = {});

  std::size_t rows() const { return responses_.size(); }
  std::size_t cols() const { return schema_.size(); }

  const std::vector<std::string>& schema() const { return schema_; }
  const std::vector<SurvivalSample>& responses() const { return responses_; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const double> column(std::size_t j) const { return columns_[j]; }
  double at(std::size_t row, std::size_t col) const { return columns_[col][row]; }
  std::vector<double> row(std::size_t i) const;

  Dataset subset(std::span<const std::size_t> rows) const;

 private:
  std::vector<std::string> schema_;
  std::vector<std::vector<double>> columns_;
  std::vector<SurvivalSample> responses_;
  std::vector<std::string> ids_;
};

/// CSV layout: optional '#' comment lines, header
/// `player_id,time,event,<covariates...>`, then one row per subject with
/// event encoded as 0/1.
Dataset read_dataset_csv(const std::filesystem::path& path);
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path,
                       const std::string& fingerprint_comment);

/// Covariate-only table (header `player_id,<covariates...>`); extra
/// columns such as time/event are ignored. Rows are returned in file order.
struct PlayerTable {
  std::vector<std::string> ids;
  std::vector<std::string> schema;
  std::vector<std::vector<double>> rows;
};
PlayerTable read_player_table(const std::filesystem::path& path,
                              std::span<const std::string> required_schema);

}  // namespace churn
