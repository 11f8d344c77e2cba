#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "mapsel/model_space.hpp"

namespace mapsel {

enum class Intercept { Exclude, Include };

/// An n x p design. The intercept column, when enabled, is implicit: it is
/// part of every fitted model and never a predictor index.
class DesignMatrix {
 public:
  explicit DesignMatrix(Eigen::MatrixXd x, Intercept intercept = Intercept::Include);

  const Eigen::MatrixXd& x() const { return x_; }
  std::size_t n() const { return static_cast<std::size_t>(x_.rows()); }
  std::size_t p() const { return static_cast<std::size_t>(x_.cols()); }
  bool has_intercept() const { return intercept_ == Intercept::Include; }
  Intercept intercept() const { return intercept_; }

  /// Numerical rank of the predictor columns, computed once at construction.
  std::size_t rank() const { return rank_; }

 private:
  Eigen::MatrixXd x_;
  Intercept intercept_;
  std::size_t rank_ = 0;
};

struct FitResult {
  Eigen::VectorXd beta;     // length p, zero off the model
  double intercept = 0.0;   // 0 when the design has no intercept
  Eigen::VectorXd fitted;   // X beta (+ intercept)
  double rss = 0.0;         // ||y - fitted||^2
  double quadform = 0.0;    // y' H_M y = ||fitted||^2
};

/// Singular values at or below this are treated as zero.
double rank_tolerance(std::size_t rows, std::size_t cols, double largest_singular_value);

std::size_t numerical_rank(const Eigen::MatrixXd& a);

inline std::size_t rank(const DesignMatrix& x) { return x.rank(); }

/// Least squares on the columns of `m` (plus intercept). Rank-deficient
/// column sets get the minimum-norm solution.
FitResult fit_ls(const DesignMatrix& x, const Eigen::VectorXd& y, const Model& m);

/// Squared norm of the projection of y onto span(intercept, X_m).
double quadform(const DesignMatrix& x, const Eigen::VectorXd& y, const Model& m);

/// y' H_k y for the nested models spanned by the first k predictor columns
/// (plus the intercept, if any), k = 0..p, in one orthogonalization pass.
/// Columns already in the span of their predecessors add nothing.
std::vector<double> nested_quadforms(const DesignMatrix& x, const Eigen::VectorXd& y);

/// Orthonormal basis of the discrete polynomial spaces on `points`:
/// column j spans degree j, j = 0..ncols-1. Built by the Stieltjes
/// recurrence with full reorthogonalization, so no Vandermonde matrix is formed.
Eigen::MatrixXd orthonormal_polynomial_basis(std::span<const double> points, std::size_t ncols);

struct SparseEigs {
  double phi_min = 0.0;
  double phi_max = 0.0;
  double tau = 0.0;
};

/// Largest number of k-column subsets sparse_eigs will scan.
inline constexpr std::uint64_t kSparseEigsCap = 200'000;

/// Extreme eigenvalues over all k x k principal submatrices of X'X.
/// Requires 1 <= k <= rank; throws CapacityError if C(p,k) > kSparseEigsCap.
SparseEigs sparse_eigs(const DesignMatrix& x, std::size_t k);

namespace serial {
// Single-threaded reference kernels; the parallel versions must agree exactly.
SparseEigs sparse_eigs(const DesignMatrix& x, std::size_t k);
}  // namespace serial

}  // namespace mapsel
