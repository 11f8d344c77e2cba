#include "mapsel/linalg.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mapsel/errors.hpp"

namespace mapsel {

double rank_tolerance(std::size_t rows, std::size_t cols, double largest_singular_value) {
  return static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon() *
         largest_singular_value;
}

std::size_t numerical_rank(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  const double tol = rank_tolerance(a.rows(), a.cols(), s(0));
  std::size_t r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) r += s(i) > tol;
  return r;
}

DesignMatrix::DesignMatrix(Eigen::MatrixXd x, Intercept intercept)
    : x_(std::move(x)), intercept_(intercept) {
  if (!x_.allFinite()) throw DomainError("design matrix has non-finite entries");
  rank_ = numerical_rank(x_);
}

namespace {

void check_response(const DesignMatrix& x, const Eigen::VectorXd& y) {
  if (static_cast<std::size_t>(y.size()) != x.n()) {
    throw DomainError("response length " + std::to_string(y.size()) + " does not match n=" +
                      std::to_string(x.n()));
  }
}

void check_model(const DesignMatrix& x, const Model& m) {
  if (!m.empty() && m.max_index() >= x.p()) {
    throw DomainError("model index " + std::to_string(m.max_index()) + " out of bounds for p=" +
                      std::to_string(x.p()));
  }
}

}  // namespace

FitResult fit_ls(const DesignMatrix& x, const Eigen::VectorXd& y, const Model& m) {
  check_response(x, y);
  check_model(x, m);
  const Eigen::Index n = static_cast<Eigen::Index>(x.n());
  const Eigen::Index offset = x.has_intercept() ? 1 : 0;
  const Eigen::Index cols = offset + static_cast<Eigen::Index>(m.size());

  FitResult out;
  out.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(x.p()));
  if (cols == 0) {
    out.fitted = Eigen::VectorXd::Zero(n);
    out.rss = y.squaredNorm();
    out.quadform = 0.0;
    return out;
  }

  Eigen::MatrixXd a(n, cols);
  if (offset) a.col(0).setOnes();
  for (std::size_t i = 0; i < m.size(); ++i) {
    a.col(offset + static_cast<Eigen::Index>(i)) = x.x().col(static_cast<Eigen::Index>(m.indices()[i]));
  }

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(static_cast<double>(std::max(n, cols)) * std::numeric_limits<double>::epsilon());
  cod.compute(a);
  const Eigen::VectorXd coef = cod.solve(y);

  if (offset) out.intercept = coef(0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    out.beta(static_cast<Eigen::Index>(m.indices()[i])) = coef(offset + static_cast<Eigen::Index>(i));
  }
  out.fitted = a * coef;
  out.rss = (y - out.fitted).squaredNorm();
  out.quadform = out.fitted.squaredNorm();
  return out;
}

double quadform(const DesignMatrix& x, const Eigen::VectorXd& y, const Model& m) {
  return fit_ls(x, y, m).quadform;
}

namespace {

// Appends `v` to the orthonormal basis `q` (first `used` columns) if it is not
// numerically in their span. Returns false when v is dependent.
bool orthonormalize_into(Eigen::MatrixXd& q, Eigen::Index& used, Eigen::VectorXd v) {
  const double original = v.norm();
  if (original == 0.0) return false;
  // Two passes of classical Gram-Schmidt keep the basis orthogonal to working precision.
  for (int pass = 0; pass < 2 && used > 0; ++pass) {
    v -= q.leftCols(used) * (q.leftCols(used).transpose() * v);
  }
  const double residual = v.norm();
  const double tol = static_cast<double>(std::max<Eigen::Index>(q.rows(), q.cols())) *
                     std::numeric_limits<double>::epsilon() * original;
  if (residual <= tol || used >= q.rows()) return false;
  q.col(used++) = v / residual;
  return true;
}

}  // namespace

std::vector<double> nested_quadforms(const DesignMatrix& x, const Eigen::VectorXd& y) {
  check_response(x, y);
  const Eigen::Index n = static_cast<Eigen::Index>(x.n());
  const std::size_t p = x.p();
  Eigen::MatrixXd q(n, std::min<Eigen::Index>(n, static_cast<Eigen::Index>(p) + 1));
  Eigen::Index used = 0;

  double acc = 0.0;
  auto absorb = [&](const Eigen::VectorXd& col) {
    if (orthonormalize_into(q, used, col)) {
      const double c = q.col(used - 1).dot(y);
      acc += c * c;
    }
  };

  std::vector<double> out;
  out.reserve(p + 1);
  if (x.has_intercept()) absorb(Eigen::VectorXd::Ones(n));
  out.push_back(acc);
  for (std::size_t j = 0; j < p; ++j) {
    absorb(x.x().col(static_cast<Eigen::Index>(j)));
    out.push_back(acc);
  }
  return out;
}

Eigen::MatrixXd orthonormal_polynomial_basis(std::span<const double> points, std::size_t ncols) {
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  if (ncols > points.size()) {
    throw DomainError("at most " + std::to_string(points.size()) + " orthonormal polynomials exist on " +
                      std::to_string(points.size()) + " points");
  }
  const Eigen::Map<const Eigen::VectorXd> t(points.data(), n);
  Eigen::MatrixXd q(n, static_cast<Eigen::Index>(ncols));
  Eigen::Index used = 0;
  if (ncols == 0) return q;
  if (!orthonormalize_into(q, used, Eigen::VectorXd::Ones(n))) throw DomainError("empty point set");
  while (static_cast<std::size_t>(used) < ncols) {
    Eigen::VectorXd next = t.cwiseProduct(q.col(used - 1));
    if (!orthonormalize_into(q, used, std::move(next))) {
      throw DomainError("polynomial basis degenerated at degree " + std::to_string(used) +
                        "; are the points distinct?");
    }
  }
  return q;
}

// ---------------------------------------------------------------------------
// Sparse eigenvalues

namespace {

std::vector<std::vector<Index>> column_subsets(const DesignMatrix& x, std::size_t k) {
  if (k < 1 || k > x.rank()) {
    throw DomainError("sparse_eigs requires 1 <= k <= rank (k=" + std::to_string(k) +
                      ", rank=" + std::to_string(x.rank()) + ")");
  }
  const auto total = count_models(ModelSpace::complete(x.p()), k);
  if (total > kSparseEigsCap) {
    throw CapacityError("sparse_eigs: C(" + std::to_string(x.p()) + "," + std::to_string(k) + ")=" +
                        std::to_string(total) + " exceeds cap " + std::to_string(kSparseEigsCap));
  }
  std::vector<std::vector<Index>> subsets;
  subsets.reserve(total);
  for_each_model(ModelSpace::complete(x.p()), k, [&](const Model& m) {
    subsets.emplace_back(m.indices().begin(), m.indices().end());
  });
  return subsets;
}

std::pair<double, double> extreme_eigenvalues(const Eigen::MatrixXd& gram, const std::vector<Index>& cols) {
  const Eigen::Index k = static_cast<Eigen::Index>(cols.size());
  Eigen::MatrixXd sub(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b)
      sub(a, b) = gram(static_cast<Eigen::Index>(cols[a]), static_cast<Eigen::Index>(cols[b]));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sub, Eigen::EigenvaluesOnly);
  return {es.eigenvalues()(0), es.eigenvalues()(k - 1)};
}

SparseEigs finish(double lo, double hi) {
  return {lo, hi, hi > 0.0 ? lo / hi : 0.0};
}

}  // namespace

SparseEigs sparse_eigs(const DesignMatrix& x, std::size_t k) {
  const auto subsets = column_subsets(x, k);
  const Eigen::MatrixXd gram = x.x().transpose() * x.x();
  const long long count = static_cast<long long>(subsets.size());
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
#pragma omp parallel for reduction(min : lo) reduction(max : hi) schedule(static)
  for (long long i = 0; i < count; ++i) {
    const auto [a, b] = extreme_eigenvalues(gram, subsets[static_cast<std::size_t>(i)]);
    lo = std::min(lo, a);
    hi = std::max(hi, b);
  }
  return finish(lo, hi);
}

namespace serial {

SparseEigs sparse_eigs(const DesignMatrix& x, std::size_t k) {
  const auto subsets = column_subsets(x, k);
  const Eigen::MatrixXd gram = x.x().transpose() * x.x();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& cols : subsets) {
    const auto [a, b] = extreme_eigenvalues(gram, cols);
    lo = std::min(lo, a);
    hi = std::max(hi, b);
  }
  return finish(lo, hi);
}

}  // namespace serial

}  // namespace mapsel
