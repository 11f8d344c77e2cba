#include "mapsel/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mapsel/errors.hpp"
#include "mapsel/penalties.hpp"

namespace mapsel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_params(double sigma2, double gamma, double q) {
  if (!(sigma2 > 0.0)) throw DomainError("sigma2 must be positive");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw DomainError("gamma must be finite and nonnegative");
  if (!(q >= 0.0 && q < 1.0)) throw DomainError("q must lie in [0,1)");
}

// ln of the unnormalized latent-size weight; -inf for k >= 1 when q = 0.
double log_term(double qf, std::size_t k, double sigma2, double gamma, double log_q) {
  const double kd = static_cast<double>(k);
  const double prior = k == 0 ? 0.0 : kd * log_q;
  return -0.5 * kd * std::log1p(gamma) + gamma / (gamma + 1.0) * qf / (2.0 * sigma2) + prior;
}

}  // namespace

std::vector<double> quadform_path(const DesignMatrix& x, const Eigen::VectorXd& y) {
  return nested_quadforms(x, y);
}

std::vector<double> e_step(std::span<const double> quadforms, double sigma2, double gamma, double q) {
  check_params(sigma2, gamma, q);
  if (quadforms.empty()) throw DomainError("e_step needs at least one size");
  const double log_q = q > 0.0 ? std::log(q) : -kInf;
  std::vector<double> u(quadforms.size());
  double mx = -kInf;
  for (std::size_t k = 0; k < u.size(); ++k) mx = std::max(mx, u[k] = log_term(quadforms[k], k, sigma2, gamma, log_q));
  double total = 0.0;
  for (double& v : u) total += (v = std::exp(v - mx));
  for (double& v : u) v /= total;
  return u;
}

std::pair<double, double> m_step(std::span<const double> u, std::span<const double> quadforms, double sigma2) {
  if (u.size() != quadforms.size()) throw DomainError("weights and quadratic forms differ in length");
  if (!(sigma2 > 0.0)) throw DomainError("sigma2 must be positive");
  double s = 0.0, a = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    s += u[k] * static_cast<double>(k);
    a += u[k] * quadforms[k];
  }
  if (!(s > 0.0)) return {0.0, 0.0};
  const double gamma = std::max(0.0, a / (sigma2 * s) - 1.0);
  return {gamma, s / (1.0 + s)};
}

double marginal_loglik(std::span<const double> quadforms, double sigma2, double gamma, double q) {
  check_params(sigma2, gamma, q);
  const std::size_t K = quadforms.size();
  const double log_q = q > 0.0 ? std::log(q) : -kInf;
  // ln((1-q)/(1-q^K)), the truncated geometric normalizer.
  const double log_norm = q > 0.0 ? std::log1p(-q) - std::log1p(-std::pow(q, static_cast<double>(K))) : 0.0;
  double mx = -kInf;
  std::vector<double> t(K);
  for (std::size_t k = 0; k < K; ++k) mx = std::max(mx, t[k] = log_term(quadforms[k], k, sigma2, gamma, log_q));
  double s = 0.0;
  for (double v : t) s += std::exp(v - mx);
  return mx + std::log(s) + log_norm;
}

EmFit fit_em(std::span<const double> quadforms, double sigma2, const EmOptions& options) {
  if (!(options.gamma0 > 0.0)) throw DomainError("initial gamma must be positive");
  if (!(options.q0 > 0.0 && options.q0 < 1.0)) throw DomainError("initial q must lie in (0,1)");
  if (!(options.tol > 0.0)) throw DomainError("tolerance must be positive");
  if (options.max_iter < 1) throw DomainError("max_iter must be at least 1");

  EmFit fit;
  fit.options = options;
  EmState state;
  state.gamma = options.gamma0;
  state.q = options.q0;
  state.loglik = marginal_loglik(quadforms, sigma2, state.gamma, state.q);
  if (!std::isfinite(state.loglik)) throw NumericalError("non-finite log-likelihood at iteration 0");
  fit.trace.push_back(state);

  for (int it = 1; it <= options.max_iter; ++it) {
    const EmState& prev = fit.trace.back();
    EmState next;
    next.iteration = it;
    next.u = e_step(quadforms, sigma2, prev.gamma, prev.q);
    std::tie(next.gamma, next.q) = m_step(next.u, quadforms, sigma2);
    next.loglik = marginal_loglik(quadforms, sigma2, next.gamma, next.q);
    if (!std::isfinite(next.loglik)) {
      throw NumericalError("non-finite log-likelihood at iteration " + std::to_string(it));
    }
    const double change = std::abs(next.gamma - prev.gamma) + std::abs(next.q - prev.q);
    fit.trace.push_back(std::move(next));
    if (change < options.tol) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

EmFit fit_em(const DesignMatrix& x, const Eigen::VectorXd& y, double sigma2, const EmOptions& options) {
  const auto path = quadform_path(x, y);
  const std::size_t r = x.rank();
  if (r == 0) throw DomainError("design has rank 0");
  return fit_em(std::span<const double>(path.data(), r), sigma2, options);
}

MapLambda lambda_from_estimates(double gamma, double q) {
  MapLambda out;
  out.clamped = gamma < kGammaFloor;
  out.gamma = std::max(gamma, kGammaFloor);
  // q = 0 means the data favour the null model; any q in (0,1) keeps the slope finite.
  out.q = std::clamp(q, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
  out.lambda = lambda_map_geometric(out.gamma, out.q);
  return out;
}

}  // namespace mapsel
