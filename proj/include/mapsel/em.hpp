#pragma once

#include <Eigen/Dense>
#include <span>
#include <utility>
#include <vector>

#include "mapsel/linalg.hpp"

namespace mapsel {

/// EM estimation of the g-prior scale gamma and the geometric size-prior
/// ratio q for nested (ordered) designs. The latent variable is the size k
/// of the true nested model, k = 0..K-1, where K is the length of the
/// quadratic-form vector (K = r for the saturated nested design).

/// y' H_k y for k = 0..r, where H_k projects on the first k columns.
std::vector<double> quadform_path(const DesignMatrix& x, const Eigen::VectorXd& y);

/// Posterior weights of the latent size given (gamma, q):
///   u_k  ~  (1+gamma)^(-k/2) exp{ gamma/(gamma+1) * qf_k / (2 sigma^2) } q^k.
/// Normalized in log space. q = 0 puts all mass on k = 0.
std::vector<double> e_step(std::span<const double> quadforms, double sigma2, double gamma, double q);

/// Closed-form M-step: gamma = (sum u_k qf_k / (sigma^2 sum u_k k) - 1)_+ and
/// q = S / (1 + S) with S = sum u_k k. Both are 0 when S = 0.
std::pair<double, double> m_step(std::span<const double> u, std::span<const double> quadforms, double sigma2);

/// Observed-data log-likelihood, up to an additive constant independent of
/// (gamma, q), under the truncated geometric prior on k = 0..K-1.
double marginal_loglik(std::span<const double> quadforms, double sigma2, double gamma, double q);

struct EmOptions {
  double gamma0 = 1.0;
  double q0 = 0.5;
  double tol = 1e-6;      // on |d gamma| + |d q|
  int max_iter = 500;
};

struct EmState {
  double gamma = 0.0;
  double q = 0.0;
  std::vector<double> u;  // E-step weights that produced (gamma, q); empty for the initial state
  double loglik = 0.0;    // at (gamma, q)
  int iteration = 0;
};

struct EmFit {
  std::vector<EmState> trace;  // trace[0] is the initial state
  bool converged = false;
  EmOptions options;

  const EmState& final_state() const { return trace.back(); }
};

/// Alternates e_step / m_step until the parameter change drops below tol.
/// Throws NumericalError (naming the iteration) on a non-finite log-likelihood.
EmFit fit_em(std::span<const double> quadforms, double sigma2, const EmOptions& options = {});

/// Uses the first rank(X) entries of quadform_path(x, y).
EmFit fit_em(const DesignMatrix& x, const Eigen::VectorXd& y, double sigma2, const EmOptions& options = {});

/// Smallest gamma handed to the penalty; EM may legitimately return 0.
inline constexpr double kGammaFloor = 1e-2;

struct MapLambda {
  double gamma = 0.0;   // after clamping
  double q = 0.0;
  double lambda = 0.0;  // (1 + 1/gamma) ln(q^-1 sqrt(1+gamma))
  bool clamped = false;
};

/// Linear-penalty slope implied by EM estimates; clamps gamma to kGammaFloor
/// and q into (0,1).
MapLambda lambda_from_estimates(double gamma, double q);

}  // namespace mapsel
