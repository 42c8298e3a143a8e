#include "churn/model.hpp"

#include "churn/error.hpp"
#include "churn/parallel.hpp"

namespace churn {

ModelType parse_model_type(const std::string& name) {
  if (name == "forest") return ModelType::forest;
  if (name == "cox") return ModelType::cox;
  if (name == "km") return ModelType::km;
  throw InvalidInput("unknown model '" + name + "' (expected forest, cox or km)");
}

std::string model_type_name(ModelType type) {
  switch (type) {
    case ModelType::forest: return "forest";
    case ModelType::cox: return "cox";
    case ModelType::km: return "km";
  }
  return "?";
}

SurvivalModel fit_model(const ModelSpec& spec, const Dataset& data) {
  switch (spec.type) {
    case ModelType::forest: return train_forest(data, spec.forest, spec.workers);
    case ModelType::cox: return fit_cox(data);
    case ModelType::km: return fit_km_baseline(data);
  }
  throw InvalidInput("unknown model type");
}

const std::vector<std::string>& model_schema(const SurvivalModel& model) {
  return std::visit(
      [](const auto& m) -> const std::vector<std::string>& {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, SurvivalForest>)
          return m.schema();
        else
          return m.schema;
      },
      model);
}

std::string model_label(const SurvivalModel& model) {
  return model_type_name(static_cast<ModelType>(model.index()));
}

std::vector<SurvivalCurve> predict_curves(const SurvivalModel& model,
                                          std::span<const std::vector<double>> players,
                                          std::size_t workers, Aggregation aggregation) {
  if (const auto* forest = std::get_if<SurvivalForest>(&model))
    return predict_batch(*forest, players, workers, aggregation);
  std::vector<SurvivalCurve> out(players.size());
  parallel_for(players.size(), workers, [&](std::size_t i) {
    if (const auto* cox = std::get_if<CoxModel>(&model))
      out[i] = cox_predict_curve(*cox, players[i]);
    else
      out[i] = km_predict_curve(std::get<KmModel>(model), players[i]);
  });
  return out;
}

std::vector<SurvivalCurve> predict_curves(const SurvivalModel& model, const Dataset& data,
                                          std::size_t workers, Aggregation aggregation) {
  if (data.schema() != model_schema(model))
    throw InvalidInput("dataset schema does not match the model schema");
  std::vector<std::vector<double>> rows(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) rows[i] = data.row(i);
  return predict_curves(model, rows, workers, aggregation);
}

void save_any_model(const SurvivalModel& model, const std::filesystem::path& path) {
  if (const auto* forest = std::get_if<SurvivalForest>(&model)) return save_model(*forest, path);
  if (const auto* cox = std::get_if<CoxModel>(&model))
    return write_file(path, wrap_envelope(ModelKind::cox, serialize_cox(*cox)));
  write_file(path, wrap_envelope(ModelKind::km, serialize_km(std::get<KmModel>(model))));
}

SurvivalModel load_any_model(const std::filesystem::path& path) {
  const auto env = unwrap_envelope(read_file(path));
  switch (env.kind) {
    case ModelKind::forest: return SurvivalForest::deserialize(env.payload);
    case ModelKind::cox: return deserialize_cox(env.payload);
    case ModelKind::km: return deserialize_km(env.payload);
    case ModelKind::partial:
      throw InvalidInput(path.string() + " is a partial model; merge it first");
  }
  throw CorruptModel("unknown model kind");
}

}  // namespace churn
