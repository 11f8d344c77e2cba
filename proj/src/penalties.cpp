#include "mapsel/penalties.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mapsel/errors.hpp"

namespace mapsel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> v) {
  double mx = -kInf;
  for (double t : v) mx = std::max(mx, t);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double t : v) s += std::exp(t - mx);
  return mx + std::log(s);
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(name) + " must be positive and finite");
}

}  // namespace

std::vector<double> penalty_log_counts(const ModelSpace& space, std::size_t r) {
  if (r > space.p()) throw DomainError("r exceeds the number of predictors");
  std::vector<double> out(r + 1);
  for (std::size_t k = 0; k <= r; ++k) out[k] = log_count_models(space, k);
  if (std::isfinite(out[r])) out[r] = 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// PriorSpec

PriorSpec::PriorSpec(PriorKind kind, double q, std::vector<double> log_weights)
    : kind_(kind), q_(q), log_weights_(std::move(log_weights)) {
  if (log_weights_.empty()) throw DomainError("prior needs at least one size");
}

double PriorSpec::weight(std::size_t k) const { return std::exp(log_weights_.at(k)); }

PriorSpec PriorSpec::truncated_geometric(double q, std::span<const double> log_counts) {
  if (!(q > 0.0 && q < 1.0)) throw DomainError("geometric prior needs 0 < q < 1");
  const double lq = std::log(q);
  std::vector<double> lw(log_counts.size(), -kInf);
  for (std::size_t k = 0; k < lw.size(); ++k)
    if (std::isfinite(log_counts[k])) lw[k] = static_cast<double>(k) * lq;
  const double norm = log_sum_exp(lw);
  for (double& v : lw)
    if (std::isfinite(v)) v -= norm;
  return PriorSpec(PriorKind::TruncatedGeometric, q, std::move(lw));
}

PriorSpec PriorSpec::uniform(std::span<const double> log_counts) {
  std::vector<double> lw(log_counts.size(), -kInf);
  const auto attainable = std::count_if(log_counts.begin(), log_counts.end(), [](double v) { return std::isfinite(v); });
  if (attainable == 0) throw DomainError("uniform prior has no attainable size");
  for (std::size_t k = 0; k < lw.size(); ++k)
    if (std::isfinite(log_counts[k])) lw[k] = -std::log(static_cast<double>(attainable));
  return PriorSpec(PriorKind::Uniform, 0.0, std::move(lw));
}

PriorSpec PriorSpec::custom(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("prior weights must be finite and nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw DomainError("prior weights sum to zero");
  std::vector<double> lw(weights.size());
  for (std::size_t k = 0; k < lw.size(); ++k) lw[k] = weights[k] > 0.0 ? std::log(weights[k] / total) : -kInf;
  return PriorSpec(PriorKind::Custom, 0.0, std::move(lw));
}

// ---------------------------------------------------------------------------
// Penalties

double c_gamma(double gamma) { return 8.0 * (gamma + 0.75) * (gamma + 0.75); }

double lambda_bic(std::size_t n) { return 0.5 * std::log(static_cast<double>(n)); }

double lambda_ric(std::size_t p) { return std::log(static_cast<double>(p)); }

double lambda_map_geometric(double gamma, double q) {
  require_positive(gamma, "gamma");
  if (!(q > 0.0 && q < 1.0)) throw DomainError("q must lie in (0,1)");
  return (1.0 + 1.0 / gamma) * (-std::log(q) + 0.5 * std::log1p(gamma));
}

PenaltyFn map_penalty(const ModelSpace& space, const PriorSpec& prior, double gamma, double sigma2) {
  require_positive(gamma, "gamma");
  require_positive(sigma2, "sigma2");
  const std::size_t r = prior.r();
  const auto log_m = penalty_log_counts(space, r);
  const double scale = 2.0 * sigma2 * (1.0 + 1.0 / gamma);
  const double half_log1g = 0.5 * std::log1p(gamma);

  PenaltyFn pen{std::vector<double>(r + 1, kInf), MapInduced{gamma, sigma2}};
  for (std::size_t k = 0; k <= r; ++k) {
    const double lp = prior.log_weight(k);
    const bool admissible = std::isfinite(log_m[k]);
    if (admissible && !std::isfinite(lp)) {
      throw ConfigError("prior is zero at admissible size k=" + std::to_string(k));
    }
    if (!admissible && std::isfinite(lp)) {
      throw ConfigError("prior puts mass on size k=" + std::to_string(k) + " which has no admissible model");
    }
    if (admissible) pen.values[k] = scale * (log_m[k] - lp + static_cast<double>(k) * half_log1g);
  }
  return pen;
}

PenaltyFn linear_penalty(double lambda, double sigma2, std::size_t r) {
  require_positive(lambda, "lambda");
  require_positive(sigma2, "sigma2");
  PenaltyFn pen{std::vector<double>(r + 1), LinearPenalty{lambda, sigma2}};
  for (std::size_t k = 0; k <= r; ++k) pen.values[k] = 2.0 * sigma2 * lambda * static_cast<double>(k);
  return pen;
}

// ---------------------------------------------------------------------------
// Condition checks

PriorConditionReport check_prior_conditions(const ModelSpace& space, const PriorSpec& prior, double gamma, double c) {
  require_positive(gamma, "gamma");
  require_positive(c, "c");
  const std::size_t r = prior.r();
  const auto log_m = penalty_log_counts(space, r);

  PriorConditionReport rep;
  rep.gamma = gamma;
  rep.c = c;
  rep.c_gamma = c_gamma(gamma);
  rep.risk_constant = 1.0 + 1.0 / (2.0 * gamma);
  rep.lower_ok = rep.upper_ok = rep.l_k_ok = rep.risk_condition_ok = true;

  double tail = 0.0;
  for (std::size_t k = 1; k <= r; ++k) {
    if (!std::isfinite(log_m[k])) continue;
    const double kd = static_cast<double>(k);
    PriorConditionRow row;
    row.k = k;
    row.log_m = log_m[k];
    row.log_pi = prior.log_weight(k);
    // Compare in log space: ln min{m^-c, e^-ck} = -c max{ln m, k}.
    row.lower_ok = row.log_pi >= -c * std::max(row.log_m, kd);
    row.upper_ok = row.log_pi <= row.log_m - rep.c_gamma * kd;
    row.l_k = (row.log_m - row.log_pi) / kd;
    row.l_k_ok = row.l_k >= rep.c_gamma;
    if (std::isfinite(row.l_k)) {
      const double lhs = (1.0 + 1.0 / gamma) * (2.0 * row.l_k + std::log1p(gamma));
      const double root = 1.0 + std::sqrt(2.0 * row.l_k);
      row.risk_condition_ok = lhs >= rep.risk_constant * root * root;
    }
    // m(k) e^{-k L_k} is exactly pi(k).
    tail += std::exp(row.log_m - kd * row.l_k);
    rep.lower_ok &= row.lower_ok;
    rep.upper_ok &= row.upper_ok;
    rep.l_k_ok &= row.l_k_ok;
    rep.risk_condition_ok &= row.risk_condition_ok;
    rep.rows.push_back(row);
  }
  rep.tail_mass = tail;
  rep.tail_mass_ok = tail < 1.0;
  rep.theorem1_applicable = rep.lower_ok && rep.upper_ok;
  return rep;
}

double minimal_lower_constant(const ModelSpace& space, const PriorSpec& prior) {
  const auto log_m = penalty_log_counts(space, prior.r());
  double c = 0.0;
  for (std::size_t k = 1; k <= prior.r(); ++k) {
    if (!std::isfinite(log_m[k])) continue;
    const double lp = prior.log_weight(k);
    if (!std::isfinite(lp)) return kInf;
    c = std::max(c, -lp / std::max(log_m[k], static_cast<double>(k)));
  }
  return c;
}

PenaltyBoundReport penalty_lower_bound_check(const PenaltyFn& pen, const ModelSpace& space, const PriorSpec& prior,
                                             double gamma, double sigma2, double c) {
  PenaltyBoundReport rep;
  const auto cond = check_prior_conditions(space, prior, gamma, c);
  if (!cond.upper_ok) {
    rep.reason = "prior violates pi(k) <= m(k) exp(-c(gamma) k)";
    return rep;
  }
  if (pen.values.size() != prior.size()) {
    rep.reason = "penalty and prior cover different size ranges";
    return rep;
  }
  rep.applicable = true;
  const double cg = c_gamma(gamma);
  const double factor = 1.0 + 1.0 / gamma;
  rep.upper_constant = 2.0 * factor * (std::max(c, cg) + 1.0 + std::log1p(gamma));
  rep.passed = true;
  for (const auto& crow : cond.rows) {
    const double kd = static_cast<double>(crow.k);
    PenaltyBoundRow row;
    row.k = crow.k;
    row.pen = pen(crow.k);
    row.lower = 2.0 * sigma2 * factor * kd * (cg + 0.5 * std::log1p(gamma));
    row.upper = rep.upper_constant * sigma2 * std::max(crow.log_m, kd);
    // Relative slack for the equality case (ordered space, q = e^-c(gamma)).
    const double slack = 1e-12 * std::max(1.0, std::abs(row.lower));
    row.lower_ok = row.pen >= row.lower - slack;
    row.upper_ok = row.pen <= row.upper + slack;
    rep.passed &= row.lower_ok && row.upper_ok;
    rep.rows.push_back(row);
  }
  if (!rep.passed) rep.reason = "penalty bound violated";
  return rep;
}

}  // namespace mapsel
