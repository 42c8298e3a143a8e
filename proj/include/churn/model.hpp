#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "churn/baselines.hpp"
#include "churn/dataset.hpp"
#include "churn/forest.hpp"

namespace churn {

using SurvivalModel = std::variant<SurvivalForest, CoxModel, KmModel>;

enum class ModelType { forest, cox, km };

ModelType parse_model_type(const std::string& name);
std::string model_type_name(ModelType type);

/// Everything needed to (re)fit a model on a resampled dataset.
struct ModelSpec {
  ModelType type = ModelType::forest;
  ForestParams forest;
  Aggregation aggregation = Aggregation::weights;
  std::size_t workers = 1;  // used for forest training and prediction
};

SurvivalModel fit_model(const ModelSpec& spec, const Dataset& data);

const std::vector<std::string>& model_schema(const SurvivalModel& model);
std::string model_label(const SurvivalModel& model);

/// One curve per row of `players`, in order.
std::vector<SurvivalCurve> predict_curves(const SurvivalModel& model,
                                          std::span<const std::vector<double>> players,
                                          std::size_t workers,
                                          Aggregation aggregation = Aggregation::weights);
std::vector<SurvivalCurve> predict_curves(const SurvivalModel& model, const Dataset& data,
                                          std::size_t workers,
                                          Aggregation aggregation = Aggregation::weights);

/// Shared envelope for all model kinds; forest files are the same bytes
/// that save_model(SurvivalForest) writes.
void save_any_model(const SurvivalModel& model, const std::filesystem::path& path);
SurvivalModel load_any_model(const std::filesystem::path& path);

}  // namespace churn
