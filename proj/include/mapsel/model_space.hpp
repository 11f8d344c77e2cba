#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mapsel {

using Index = std::size_t;

/// A candidate model: a sorted set of distinct predictor indices.
///
/// The intercept is never an index. Models order lexicographically over
/// their sorted index tuples.
class Model {
 public:
  Model() = default;

  /// Sorts the indices; throws DomainError on duplicates.
  explicit Model(std::vector<Index> indices);

  std::span<const Index> indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  bool has(Index j) const;
  Index max_index() const { return indices_.empty() ? 0 : indices_.back(); }

  std::string to_string() const;

  friend bool operator==(const Model&, const Model&) = default;
  friend auto operator<=>(const Model& a, const Model& b) { return a.indices_ <=> b.indices_; }

 private:
  std::vector<Index> indices_;
};

enum class Family { Complete, Ordered, PairedHierarchy, Grouped, Explicit };

std::string family_name(Family f);

/// A family of structural constraints over p predictors.
///
/// PairedHierarchy layout: indices 0..K-1 are main effects, and the
/// interaction (i,j) with i<j sits at K + (rank of (i,j) in lexicographic
/// pair order), so p = K(K+1)/2.
///
/// Immutable after construction. Copies share the underlying tables.
class ModelSpace {
 public:
  static ModelSpace complete(std::size_t p);
  static ModelSpace ordered(std::size_t p);
  static ModelSpace paired_hierarchy(std::size_t main_effects);
  /// `groups` must partition {0,...,p-1}.
  static ModelSpace grouped(std::size_t p, std::vector<std::vector<Index>> groups);
  static ModelSpace explicit_list(std::size_t p, std::vector<Model> models);

  Family family() const { return family_; }
  std::size_t p() const { return p_; }

  // PairedHierarchy
  std::size_t main_effects() const { return main_effects_; }
  bool is_interaction(Index j) const;
  std::pair<Index, Index> parents(Index interaction) const;
  Index interaction_index(Index a, Index b) const;

  // Grouped
  const std::vector<std::vector<Index>>& groups() const;
  std::size_t group_of(Index j) const;

  // Explicit
  const std::vector<Model>& models() const;
  bool listed(const Model& m) const;

 private:
  struct Tables;

  ModelSpace(Family f, std::size_t p) : family_(f), p_(p) {}

  Family family_;
  std::size_t p_ = 0;
  std::size_t main_effects_ = 0;
  std::shared_ptr<const Tables> tables_;
};

/// True iff `m` is admissible in `space`. Throws DomainError if an index is >= p.
bool contains(const ModelSpace& space, const Model& m);

/// Exact number m(k) of admissible models of size k. Closed form or
/// combinatorial counting for every family; throws CapacityError when the
/// count does not fit in 64 bits and DomainError when k > p.
std::uint64_t count_models(const ModelSpace& space, std::size_t k);

/// ln m(k), -inf when m(k) = 0. Valid even where count_models would overflow.
double log_count_models(const ModelSpace& space, std::size_t k);

/// Sum of m(k) over k = 0..kmax, saturating at UINT64_MAX.
std::uint64_t total_models(const ModelSpace& space, std::size_t kmax);

using ModelVisitor = std::function<void(const Model&)>;

/// Visits every admissible model of size k exactly once, in lexicographic order.
void for_each_model(const ModelSpace& space, std::size_t k, const ModelVisitor& visit);

std::vector<Model> enumerate_models(const ModelSpace& space, std::size_t k);

/// floor(k/3) * ln(p/k); requires k >= 3 and p > k.
double lemma1_lower_bound(std::size_t p, std::size_t k);

}  // namespace mapsel
