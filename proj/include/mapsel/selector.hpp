#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mapsel/linalg.hpp"
#include "mapsel/model_space.hpp"
#include "mapsel/penalties.hpp"

namespace mapsel {

enum class Strategy { Exhaustive, Greedy };

std::string strategy_name(Strategy s);
Strategy parse_strategy(const std::string& name);

/// Exhaustive search refuses spaces with more admissible models than this.
inline constexpr std::uint64_t kEnumerationCap = std::uint64_t{1} << 20;

/// Best admissible model of one size. Sizes with no admissible model, or
/// sizes a greedy path skipped, keep rss = +inf.
struct SizeEntry {
  double rss = std::numeric_limits<double>::infinity();
  Model model;
  double penalty = std::numeric_limits<double>::infinity();
  double total = std::numeric_limits<double>::infinity();
};

struct SelectionResult {
  Model model;
  Eigen::VectorXd beta;
  double intercept = 0.0;
  double objective = std::numeric_limits<double>::infinity();
  std::vector<SizeEntry> per_size;  // k = 0..r
  Strategy strategy = Strategy::Exhaustive;
};

/// Minimum-RSS admissible model for each size k = 0..r. Ordered spaces use
/// the nested orthogonalization path; other families enumerate (Exhaustive)
/// or walk a constraint-respecting forward path (Greedy). Ties go to the
/// lexicographically smaller model.
std::vector<SizeEntry> best_per_size(const DesignMatrix& x, const Eigen::VectorXd& y, const ModelSpace& space,
                                     std::size_t r, Strategy strategy);

/// Attaches `pen` to a per-size table and picks the minimizer of RSS + Pen.
/// Ties break on smaller size, then lexicographic model order. Returns the
/// winning size.
std::size_t choose_size(std::vector<SizeEntry>& per_size, const PenaltyFn& pen);

/// min over admissible M of ||y - X b_M||^2 + Pen(|M|).
SelectionResult select(const DesignMatrix& x, const Eigen::VectorXd& y, const ModelSpace& space,
                       const PenaltyFn& pen, Strategy strategy = Strategy::Exhaustive);

/// select() with the prior-induced penalty.
SelectionResult select_map(const DesignMatrix& x, const Eigen::VectorXd& y, const ModelSpace& space,
                           const PriorSpec& prior, double gamma, double sigma2,
                           Strategy strategy = Strategy::Exhaustive);

struct PosteriorEntry {
  Model model;
  double log_weight = 0.0;  // unnormalized
  double weight = 0.0;      // normalized
};

struct PosteriorTable {
  std::vector<PosteriorEntry> entries;  // by size, then lexicographic

  /// Highest-weight model; ties go to the smaller size, then lexicographic order.
  const PosteriorEntry& argmax() const;
};

/// Posterior probabilities of every admissible model of size 0..prior.r()
/// under the size prior and g-prior on coefficients. Throws CapacityError
/// beyond kEnumerationCap models.
PosteriorTable posterior_weights(const DesignMatrix& x, const Eigen::VectorXd& y, const ModelSpace& space,
                                 const PriorSpec& prior, double gamma, double sigma2);

namespace serial {
std::vector<SizeEntry> best_per_size(const DesignMatrix& x, const Eigen::VectorXd& y, const ModelSpace& space,
                                     std::size_t r, Strategy strategy);
}  // namespace serial

}  // namespace mapsel
