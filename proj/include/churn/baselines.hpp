#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "churn/dataset.hpp"
#include "churn/serialize.hpp"
#include "churn/survival.hpp"

namespace churn {

/// Cox proportional-hazards fit with Breslow ties.
struct CoxModel {
  std::vector<std::string> schema;
  std::vector<double> beta;
  std::vector<double> covariate_means;
  CumulativeHazard baseline_cumhaz;  // Breslow, at centered covariates
  std::size_t iterations = 0;
};

struct CoxOptions {
  std::size_t max_iterations = 50;
  double tolerance = 1e-9;  // on max |delta beta|
};

/// Newton–Raphson on the partial log-likelihood with step halving.
/// Covariates that are constant in the data get beta = 0 and are left out
/// of the Newton system. Throws NumericFailure on non-convergence or a
/// singular Hessian.
CoxModel fit_cox(const Dataset& data, const CoxOptions& options = {});

/// Breslow partial log-likelihood, gradient and Hessian at beta for the
/// given centered design (row-major n x p). Exposed for tests.
struct CoxDerivatives {
  double loglik = 0.0;
  std::vector<double> gradient;
  std::vector<double> hessian;  // p x p row-major, negative semidefinite
};
CoxDerivatives cox_derivatives(std::span<const SurvivalSample> samples,
                               std::span<const double> design, std::size_t p,
                               std::span<const double> beta);

/// Partial log-likelihood of a fitted model's data at an arbitrary beta
/// (uncentered covariates; centering does not change it).
double cox_partial_loglik(const Dataset& data, std::span<const double> beta);

SurvivalCurve cox_predict_curve(const CoxModel& model, std::span<const double> x);

/// Population Kaplan–Meier baseline; ignores covariates when predicting.
struct KmModel {
  std::vector<std::string> schema;
  SurvivalCurve curve;
};

KmModel fit_km_baseline(const Dataset& data);
SurvivalCurve km_predict_curve(const KmModel& model, std::span<const double> x);

std::vector<std::uint8_t> serialize_cox(const CoxModel& model);
CoxModel deserialize_cox(std::span<const std::uint8_t> payload);
std::vector<std::uint8_t> serialize_km(const KmModel& model);
KmModel deserialize_km(std::span<const std::uint8_t> payload);

}  // namespace churn
