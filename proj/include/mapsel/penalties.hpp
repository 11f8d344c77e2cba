#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mapsel/model_space.hpp"

namespace mapsel {

/// ln m(k) for k = 0..r as seen by the penalty: sizes above r do not exist,
/// and all size-r models collapse to the single saturated model, so m(r) is
/// 1 whenever any size-r model is admissible. Unattainable sizes are -inf.
std::vector<double> penalty_log_counts(const ModelSpace& space, std::size_t r);

enum class PriorKind { TruncatedGeometric, Uniform, Custom };

/// Prior pi(k) on the model size, k = 0..r. Stored as log-weights so that
/// very small geometric ratios (q ~ e^-180) stay representable.
class PriorSpec {
 public:
  /// pi(k) proportional to q^k over the attainable sizes (log_counts[k] > -inf).
  static PriorSpec truncated_geometric(double q, std::span<const double> log_counts);
  /// Equal mass on every attainable size.
  static PriorSpec uniform(std::span<const double> log_counts);
  /// Arbitrary nonnegative weights, normalized here.
  static PriorSpec custom(std::span<const double> weights);

  PriorKind kind() const { return kind_; }
  double q() const { return q_; }
  std::size_t r() const { return log_weights_.size() - 1; }
  std::size_t size() const { return log_weights_.size(); }
  double log_weight(std::size_t k) const { return log_weights_.at(k); }
  double weight(std::size_t k) const;
  const std::vector<double>& log_weights() const { return log_weights_; }

 private:
  PriorSpec(PriorKind kind, double q, std::vector<double> log_weights);

  PriorKind kind_;
  double q_ = 0.0;
  std::vector<double> log_weights_;
};

struct MapInduced {
  double gamma;
  double sigma2;
};

struct LinearPenalty {
  double lambda;
  double sigma2;
};

/// Pen(k) for k = 0..r; +inf marks sizes with no admissible model.
struct PenaltyFn {
  std::vector<double> values;
  std::variant<MapInduced, LinearPenalty> provenance;

  std::size_t r() const { return values.size() - 1; }
  double operator()(std::size_t k) const { return values.at(k); }
};

/// 2 sigma^2 (1 + 1/gamma) ln{ m(k) pi(k)^-1 (1+gamma)^(k/2) }.
/// Throws ConfigError when the prior is zero at an admissible size or
/// positive at an unattainable one.
PenaltyFn map_penalty(const ModelSpace& space, const PriorSpec& prior, double gamma, double sigma2);

/// 2 sigma^2 lambda k for k = 0..r.
PenaltyFn linear_penalty(double lambda, double sigma2, std::size_t r);

inline double lambda_aic() { return 1.0; }
double lambda_bic(std::size_t n);
double lambda_ric(std::size_t p);

/// Slope of the penalty induced by a geometric prior on an ordered space:
/// (1 + 1/gamma) ln(q^-1 sqrt(1 + gamma)).
double lambda_map_geometric(double gamma, double q);

/// c(gamma) = 8 (gamma + 3/4)^2.
double c_gamma(double gamma);

struct PriorConditionRow {
  std::size_t k = 0;
  double log_m = 0.0;
  double log_pi = 0.0;
  bool lower_ok = false;   // min{m^-c, e^-ck} <= pi(k)
  bool upper_ok = false;   // pi(k) <= m(k) e^{-c(gamma) k}
  double l_k = 0.0;        // (1/k) ln(m(k)/pi(k))
  bool l_k_ok = false;     // L_k >= c(gamma)
  bool risk_condition_ok = false;  // (1+1/g)(2L_k + ln(1+g)) >= C (1 + sqrt(2 L_k))^2, C = 1 + 1/(2g)
};

struct PriorConditionReport {
  double gamma = 0.0;
  double c = 0.0;
  double c_gamma = 0.0;
  double risk_constant = 0.0;      // the C used in risk_condition_ok
  double tail_mass = 0.0;          // sum_{k>=1} m(k) e^{-k L_k} = 1 - pi(0)
  bool tail_mass_ok = false;       // tail_mass < 1
  std::vector<PriorConditionRow> rows;  // k = 1..r with m(k) > 0
  bool lower_ok = false;
  bool upper_ok = false;
  bool l_k_ok = false;
  bool risk_condition_ok = false;
  bool theorem1_applicable = false;  // both prior inequalities hold at every admissible k
};

/// Evaluates the two-sided prior condition, L_k, and the derived risk-bound
/// conditions for every admissible size k = 1..r.
PriorConditionReport check_prior_conditions(const ModelSpace& space, const PriorSpec& prior, double gamma, double c);

/// Smallest c > 0 for which min{m(k)^-c, e^-ck} <= pi(k) holds at every admissible k >= 1.
double minimal_lower_constant(const ModelSpace& space, const PriorSpec& prior);

struct PenaltyBoundRow {
  std::size_t k = 0;
  double pen = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool lower_ok = false;
  bool upper_ok = false;
};

struct PenaltyBoundReport {
  bool applicable = false;
  std::string reason;
  double upper_constant = 0.0;  // C in Pen(k) <= C sigma^2 max{ln m(k), k}
  std::vector<PenaltyBoundRow> rows;
  bool passed = false;
};

/// Checks 2 sigma^2 (1+1/g) k (c(g) + ln(1+g)/2) <= Pen(k) <= C sigma^2 max{ln m(k), k}
/// with C = 2 (1+1/g) (max(c, c(g)) + 1 + ln(1+g)). Skipped, with a reason,
/// when the prior fails the upper prior inequality.
PenaltyBoundReport penalty_lower_bound_check(const PenaltyFn& pen, const ModelSpace& space, const PriorSpec& prior,
                                             double gamma, double sigma2, double c);

}  // namespace mapsel
