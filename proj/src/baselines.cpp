#include "churn/baselines.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "churn/error.hpp"

namespace churn {

namespace {

// Sorted by time descending so risk sets accumulate front to back.
std::vector<std::size_t> descending_time_order(std::span<const SurvivalSample> samples) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return samples[a].time > samples[b].time; });
  return order;
}

void check_arity(const std::vector<std::string>& schema, std::span<const double> x) {
  if (x.size() != schema.size())
    throw InvalidInput("covariate vector has " + std::to_string(x.size()) + " entries, model schema has " +
                       std::to_string(schema.size()));
}

}  // namespace

CoxDerivatives cox_derivatives(std::span<const SurvivalSample> samples, std::span<const double> design,
                               std::size_t p, std::span<const double> beta) {
  const std::size_t n = samples.size();
  CoxDerivatives d;
  d.gradient.assign(p, 0.0);
  d.hessian.assign(p * p, 0.0);
  std::vector<double> eta(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < p; ++j) s += design[i * p + j] * beta[j];
    eta[i] = s;
  }
  // Shift by the largest linear predictor so exp() cannot overflow.
  const double shift = n ? *std::max_element(eta.begin(), eta.end()) : 0.0;
  const auto order = descending_time_order(samples);
  double s0 = 0.0;
  std::vector<double> s1(p, 0.0), s2(p * p, 0.0);
  std::size_t k = 0;
  while (k < n) {
    const double t = samples[order[k]].time;
    double deaths = 0.0;
    std::vector<double> death_x(p, 0.0);
    double death_eta = 0.0;
    for (; k < n && samples[order[k]].time == t; ++k) {
      const std::size_t i = order[k];
      const double r = std::exp(eta[i] - shift);
      const double* xi = &design[i * p];
      s0 += r;
      for (std::size_t a = 0; a < p; ++a) {
        s1[a] += r * xi[a];
        for (std::size_t b = 0; b < p; ++b) s2[a * p + b] += r * xi[a] * xi[b];
      }
      if (samples[i].event) {
        deaths += 1.0;
        death_eta += eta[i];
        for (std::size_t a = 0; a < p; ++a) death_x[a] += xi[a];
      }
    }
    if (deaths == 0.0) continue;
    d.loglik += death_eta - deaths * (std::log(s0) + shift);
    for (std::size_t a = 0; a < p; ++a) {
      d.gradient[a] += death_x[a] - deaths * s1[a] / s0;
      for (std::size_t b = 0; b < p; ++b)
        d.hessian[a * p + b] -= deaths * (s2[a * p + b] / s0 - (s1[a] / s0) * (s1[b] / s0));
    }
  }
  return d;
}

double cox_partial_loglik(const Dataset& data, std::span<const double> beta) {
  const std::size_t n = data.rows(), p = data.cols();
  if (beta.size() != p) throw InvalidInput("beta length differs from covariate count");
  std::vector<double> design(n * p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) design[i * p + j] = data.at(i, j);
  return cox_derivatives(data.responses(), design, p, beta).loglik;
}

CoxModel fit_cox(const Dataset& data, const CoxOptions& options) {
  const std::size_t n = data.rows(), p = data.cols();
  if (n == 0) throw InvalidInput("cannot fit Cox regression on an empty dataset");
  const auto& samples = data.responses();
  if (std::none_of(samples.begin(), samples.end(), [](const SurvivalSample& s) { return s.event; }))
    throw InvalidInput("Cox regression needs at least one event");

  CoxModel model;
  model.schema = data.schema();
  model.beta.assign(p, 0.0);
  model.covariate_means.assign(p, 0.0);
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < p; ++j) {
    const auto col = data.column(j);
    model.covariate_means[j] = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(n);
    if (std::any_of(col.begin(), col.end(), [&](double v) { return v != col[0]; })) active.push_back(j);
  }

  const std::size_t q = active.size();
  std::vector<double> design(n * q);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < q; ++a)
      design[i * q + a] = data.at(i, active[a]) - model.covariate_means[active[a]];

  std::vector<double> beta(q, 0.0);
  if (q > 0) {
    CoxDerivatives cur = cox_derivatives(samples, design, q, beta);
    bool converged = false;
    for (std::size_t iter = 1; iter <= options.max_iterations; ++iter) {
      model.iterations = iter;
      Eigen::Map<const Eigen::MatrixXd> hess(cur.hessian.data(), static_cast<Eigen::Index>(q),
                                             static_cast<Eigen::Index>(q));
      Eigen::Map<const Eigen::VectorXd> grad(cur.gradient.data(), static_cast<Eigen::Index>(q));
      const Eigen::MatrixXd info = -hess;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
      const double scale = std::max(1.0, info.diagonal().cwiseAbs().maxCoeff());
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
          ldlt.vectorD().minCoeff() <= 1e-12 * scale) {
        // Singular at beta = 0 means collinear covariates; later, the
        // information collapsed because some coefficient is running off.
        if (iter == 1) throw NumericFailure("Cox information matrix is singular; covariates are collinear");
        throw NumericFailure("Cox regression did not converge: monotone likelihood (separation) drives a "
                             "coefficient to infinity; penalized fits are not supported");
      }
      Eigen::VectorXd step = ldlt.solve(grad);

      // Halve the step until the likelihood does not decrease.
      std::vector<double> trial(q);
      CoxDerivatives next;
      double factor = 1.0;
      for (int halving = 0; halving < 30; ++halving) {
        for (std::size_t a = 0; a < q; ++a) trial[a] = beta[a] + factor * step(static_cast<Eigen::Index>(a));
        next = cox_derivatives(samples, design, q, trial);
        if (std::isfinite(next.loglik) && next.loglik >= cur.loglik - 1e-12 * std::fabs(cur.loglik)) break;
        factor *= 0.5;
      }
      double max_delta = 0.0;
      for (std::size_t a = 0; a < q; ++a) max_delta = std::max(max_delta, std::fabs(trial[a] - beta[a]));
      beta = trial;
      cur = std::move(next);
      if (max_delta < options.tolerance) {
        converged = true;
        break;
      }
    }
    if (!converged)
      throw NumericFailure("Cox regression did not converge in " + std::to_string(options.max_iterations) +
                           " iterations (possible monotone likelihood / separation; penalized fits are not supported)");
    for (double b : beta)
      if (!std::isfinite(b)) throw NumericFailure("Cox regression produced a non-finite coefficient");
  }
  for (std::size_t a = 0; a < q; ++a) model.beta[active[a]] = beta[a];

  // Breslow baseline cumulative hazard at the centered covariates.
  std::vector<double> risk(n);
  for (std::size_t i = 0; i < n; ++i) {
    double eta = 0.0;
    for (std::size_t a = 0; a < q; ++a) eta += design[i * q + a] * beta[a];
    risk[i] = std::exp(eta);
  }
  const auto order = descending_time_order(samples);
  std::vector<double> grid, values;
  double s0 = 0.0;
  std::size_t k = 0;
  while (k < n) {
    const double t = samples[order[k]].time;
    double deaths = 0.0;
    for (; k < n && samples[order[k]].time == t; ++k) {
      s0 += risk[order[k]];
      if (samples[order[k]].event) deaths += 1.0;
    }
    if (deaths > 0.0) {
      grid.push_back(t);
      values.push_back(deaths / s0);
    }
  }
  std::reverse(grid.begin(), grid.end());
  std::reverse(values.begin(), values.end());
  std::partial_sum(values.begin(), values.end(), values.begin());
  model.baseline_cumhaz = CumulativeHazard(std::move(grid), std::move(values));
  return model;
}

SurvivalCurve cox_predict_curve(const CoxModel& model, std::span<const double> x) {
  check_arity(model.schema, x);
  double eta = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) eta += (x[j] - model.covariate_means[j]) * model.beta[j];
  const double rel = std::exp(std::min(eta, 700.0));
  const auto& h = model.baseline_cumhaz;
  std::vector<double> probs(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) {
    probs[k] = std::clamp(std::exp(-h.values()[k] * rel), 0.0, 1.0);
    if (k > 0) probs[k] = std::min(probs[k], probs[k - 1]);
  }
  return SurvivalCurve(h.grid(), std::move(probs));
}

KmModel fit_km_baseline(const Dataset& data) {
  std::vector<double> w(data.rows(), 1.0);
  return KmModel{data.schema(), kaplan_meier(data.responses(), w)};
}

SurvivalCurve km_predict_curve(const KmModel& model, std::span<const double> x) {
  check_arity(model.schema, x);
  return model.curve;
}

namespace {

void write_schema(ByteWriter& out, const std::vector<std::string>& schema) {
  out.u64(schema.size());
  for (const auto& s : schema) out.str(s);
}

std::vector<std::string> read_schema(ByteReader& in) {
  std::vector<std::string> schema(in.u64());
  for (auto& s : schema) s = in.str();
  return schema;
}

}  // namespace

std::vector<std::uint8_t> serialize_cox(const CoxModel& model) {
  ByteWriter out;
  write_schema(out, model.schema);
  out.f64s(model.beta);
  out.f64s(model.covariate_means);
  out.f64s(model.baseline_cumhaz.grid());
  out.f64s(model.baseline_cumhaz.values());
  out.u64(model.iterations);
  return out.take();
}

CoxModel deserialize_cox(std::span<const std::uint8_t> payload) {
  ByteReader in(payload);
  CoxModel m;
  m.schema = read_schema(in);
  m.beta = in.f64s();
  m.covariate_means = in.f64s();
  auto grid = in.f64s();
  auto values = in.f64s();
  m.baseline_cumhaz = CumulativeHazard(std::move(grid), std::move(values));
  m.iterations = in.u64();
  if (!in.done() || m.beta.size() != m.schema.size() || m.covariate_means.size() != m.schema.size())
    throw CorruptModel("malformed Cox model payload");
  return m;
}

std::vector<std::uint8_t> serialize_km(const KmModel& model) {
  ByteWriter out;
  write_schema(out, model.schema);
  out.f64s(model.curve.grid());
  out.f64s(model.curve.probs());
  return out.take();
}

KmModel deserialize_km(std::span<const std::uint8_t> payload) {
  ByteReader in(payload);
  KmModel m;
  m.schema = read_schema(in);
  auto grid = in.f64s();
  auto probs = in.f64s();
  m.curve = SurvivalCurve(std::move(grid), std::move(probs));
  if (!in.done()) throw CorruptModel("malformed Kaplan-Meier model payload");
  return m;
}

}  // namespace churn
