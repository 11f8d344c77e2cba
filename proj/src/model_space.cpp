#include "mapsel/model_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "mapsel/errors.hpp"

namespace mapsel {

namespace {

struct IndexVectorHash {
  std::size_t operator()(const std::vector<Index>& v) const noexcept {
    std::size_t h = 0xcbf29ce484222325ULL;
    for (Index j : v) {
      h ^= std::hash<Index>{}(j) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }
};

constexpr std::uint64_t kSaturated = std::numeric_limits<std::uint64_t>::max();

// Exact binomial coefficient; kSaturated on overflow.
std::uint64_t binomial_or_saturate(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 c = 1;
  for (std::uint64_t i = 0; i < k; ++i) {
    c = c * (n - i) / (i + 1);
    if (c > kSaturated) return kSaturated;
  }
  return static_cast<std::uint64_t>(c);
}

std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b) {
  return (a > kSaturated - b) ? kSaturated : a + b;
}

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a == 0 || b == 0) return 0;
  return (a > kSaturated / b) ? kSaturated : a * b;
}

double log_binomial(double n, double k) {
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1);
}

double log_sum_exp(const std::vector<double>& terms) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double t : terms) mx = std::max(mx, t);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - mx);
  return mx + std::log(s);
}

void check_size(const ModelSpace& space, std::size_t k) {
  if (k > space.p()) {
    throw DomainError("model size " + std::to_string(k) + " exceeds p=" + std::to_string(space.p()));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Model

Model::Model(std::vector<Index> indices) : indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end()) {
    throw DomainError("model indices must be distinct");
  }
}

bool Model::has(Index j) const { return std::binary_search(indices_.begin(), indices_.end(), j); }

std::string Model::to_string() const {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    if (i) os << ',';
    os << indices_[i];
  }
  os << '}';
  return os.str();
}

std::string family_name(Family f) {
  switch (f) {
    case Family::Complete: return "complete";
    case Family::Ordered: return "ordered";
    case Family::PairedHierarchy: return "paired_hierarchy";
    case Family::Grouped: return "grouped";
    case Family::Explicit: return "explicit";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// ModelSpace

struct ModelSpace::Tables {
  // PairedHierarchy: parent pair of every interaction index (offset by K).
  std::vector<std::pair<Index, Index>> parent_of;
  // Grouped
  std::vector<std::vector<Index>> groups;
  std::vector<std::size_t> group_id;
  // Explicit: sorted list plus hash-set keyed by sorted indices.
  std::vector<Model> models;
  std::unordered_set<std::vector<Index>, IndexVectorHash> lookup;
};

ModelSpace ModelSpace::complete(std::size_t p) { return ModelSpace(Family::Complete, p); }

ModelSpace ModelSpace::ordered(std::size_t p) { return ModelSpace(Family::Ordered, p); }

ModelSpace ModelSpace::paired_hierarchy(std::size_t main_effects) {
  if (main_effects < 1) throw DomainError("paired hierarchy needs at least one main effect");
  const std::size_t K = main_effects;
  ModelSpace s(Family::PairedHierarchy, K * (K + 1) / 2);
  s.main_effects_ = K;
  auto t = std::make_shared<Tables>();
  for (Index a = 0; a < K; ++a)
    for (Index b = a + 1; b < K; ++b) t->parent_of.emplace_back(a, b);
  s.tables_ = std::move(t);
  return s;
}

ModelSpace ModelSpace::grouped(std::size_t p, std::vector<std::vector<Index>> groups) {
  ModelSpace s(Family::Grouped, p);
  auto t = std::make_shared<Tables>();
  t->group_id.assign(p, std::numeric_limits<std::size_t>::max());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& grp = groups[g];
    if (grp.empty()) throw DomainError("empty group " + std::to_string(g));
    std::sort(grp.begin(), grp.end());
    for (Index j : grp) {
      if (j >= p) throw DomainError("group index " + std::to_string(j) + " out of bounds");
      if (t->group_id[j] != std::numeric_limits<std::size_t>::max()) {
        throw DomainError("index " + std::to_string(j) + " appears in more than one group");
      }
      t->group_id[j] = g;
    }
  }
  for (Index j = 0; j < p; ++j) {
    if (t->group_id[j] == std::numeric_limits<std::size_t>::max()) {
      throw DomainError("groups do not cover index " + std::to_string(j));
    }
  }
  t->groups = std::move(groups);
  s.tables_ = std::move(t);
  return s;
}

ModelSpace ModelSpace::explicit_list(std::size_t p, std::vector<Model> models) {
  ModelSpace s(Family::Explicit, p);
  auto t = std::make_shared<Tables>();
  for (auto& m : models) {
    if (!m.empty() && m.max_index() >= p) throw DomainError("explicit model " + m.to_string() + " out of bounds");
    std::vector<Index> key(m.indices().begin(), m.indices().end());
    if (t->lookup.insert(std::move(key)).second) t->models.push_back(std::move(m));
  }
  // The null (intercept-only) model is always admissible.
  if (t->lookup.insert(std::vector<Index>{}).second) t->models.emplace_back();
  std::sort(t->models.begin(), t->models.end(), [](const Model& a, const Model& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  s.tables_ = std::move(t);
  return s;
}

bool ModelSpace::is_interaction(Index j) const {
  return family_ == Family::PairedHierarchy && j >= main_effects_ && j < p_;
}

std::pair<Index, Index> ModelSpace::parents(Index interaction) const {
  if (!is_interaction(interaction)) throw DomainError("index is not an interaction");
  return tables_->parent_of[interaction - main_effects_];
}

Index ModelSpace::interaction_index(Index a, Index b) const {
  if (family_ != Family::PairedHierarchy) throw DomainError("not a paired hierarchy");
  if (a > b) std::swap(a, b);
  if (a == b || b >= main_effects_) throw DomainError("invalid main-effect pair");
  const std::size_t K = main_effects_;
  // Pairs (a, *) before row a: sum_{i<a} (K-1-i).
  const std::size_t before = a * (2 * K - a - 1) / 2;
  return K + before + (b - a - 1);
}

const std::vector<std::vector<Index>>& ModelSpace::groups() const {
  if (family_ != Family::Grouped) throw DomainError("not a grouped space");
  return tables_->groups;
}

std::size_t ModelSpace::group_of(Index j) const {
  if (family_ != Family::Grouped) throw DomainError("not a grouped space");
  if (j >= p_) throw DomainError("index out of bounds");
  return tables_->group_id[j];
}

const std::vector<Model>& ModelSpace::models() const {
  if (family_ != Family::Explicit) throw DomainError("not an explicit space");
  return tables_->models;
}

bool ModelSpace::listed(const Model& m) const {
  if (family_ != Family::Explicit) throw DomainError("not an explicit space");
  return tables_->lookup.contains(std::vector<Index>(m.indices().begin(), m.indices().end()));
}

// ---------------------------------------------------------------------------
// Admissibility

bool contains(const ModelSpace& space, const Model& m) {
  if (!m.empty() && m.max_index() >= space.p()) {
    throw DomainError("model index " + std::to_string(m.max_index()) + " out of bounds for p=" +
                      std::to_string(space.p()));
  }
  const auto idx = m.indices();
  switch (space.family()) {
    case Family::Complete:
      return true;
    case Family::Ordered:
      for (std::size_t i = 0; i < idx.size(); ++i)
        if (idx[i] != i) return false;
      return true;
    case Family::PairedHierarchy:
      for (Index j : idx) {
        if (!space.is_interaction(j)) continue;
        const auto [a, b] = space.parents(j);
        if (!m.has(a) || !m.has(b)) return false;
      }
      return true;
    case Family::Grouped: {
      const auto& groups = space.groups();
      std::vector<std::size_t> seen(groups.size(), 0);
      for (Index j : idx) ++seen[space.group_of(j)];
      for (std::size_t g = 0; g < groups.size(); ++g)
        if (seen[g] != 0 && seen[g] != groups[g].size()) return false;
      return true;
    }
    case Family::Explicit:
      return space.listed(m);
  }
  return false;
}

// ---------------------------------------------------------------------------
// Counting

namespace {

// Subset-sum counts over group sizes: ways[s] = number of group subsets of total size s.
std::vector<std::uint64_t> grouped_counts(const ModelSpace& space) {
  std::vector<std::uint64_t> ways(space.p() + 1, 0);
  ways[0] = 1;
  for (const auto& g : space.groups()) {
    const std::size_t w = g.size();
    for (std::size_t s = space.p(); s >= w; --s) {
      ways[s] = saturating_add(ways[s], ways[s - w]);
      if (s == w) break;
    }
  }
  return ways;
}

std::vector<double> grouped_log_counts(const ModelSpace& space) {
  // Same recursion in log space so large partitions stay finite.
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<double> lw(space.p() + 1, ninf);
  lw[0] = 0.0;
  for (const auto& g : space.groups()) {
    const std::size_t w = g.size();
    for (std::size_t s = space.p(); s >= w; --s) {
      lw[s] = log_sum_exp({lw[s], lw[s - w]});
      if (s == w) break;
    }
  }
  return lw;
}

}  // namespace

std::uint64_t count_models(const ModelSpace& space, std::size_t k) {
  check_size(space, k);
  std::uint64_t count = 0;
  switch (space.family()) {
    case Family::Complete:
      count = binomial_or_saturate(space.p(), k);
      break;
    case Family::Ordered:
      count = 1;
      break;
    case Family::PairedHierarchy: {
      // Choose s main effects, then k-s of the s(s-1)/2 interactions among them.
      const std::size_t K = space.main_effects();
      for (std::size_t s = 0; s <= std::min(K, k); ++s) {
        const std::uint64_t term =
            saturating_mul(binomial_or_saturate(K, s), binomial_or_saturate(s * (s - (s > 0)) / 2, k - s));
        count = saturating_add(count, term);
      }
      break;
    }
    case Family::Grouped:
      count = grouped_counts(space)[k];
      break;
    case Family::Explicit:
      count = static_cast<std::uint64_t>(std::count_if(space.models().begin(), space.models().end(),
                                                       [k](const Model& m) { return m.size() == k; }));
      break;
  }
  if (count == kSaturated) {
    throw CapacityError("m(" + std::to_string(k) + ") does not fit in 64 bits");
  }
  return count;
}

double log_count_models(const ModelSpace& space, std::size_t k) {
  check_size(space, k);
  const double ninf = -std::numeric_limits<double>::infinity();
  switch (space.family()) {
    case Family::Complete:
      return log_binomial(static_cast<double>(space.p()), static_cast<double>(k));
    case Family::Ordered:
      return 0.0;
    case Family::PairedHierarchy: {
      const std::size_t K = space.main_effects();
      std::vector<double> terms;
      for (std::size_t s = 0; s <= std::min(K, k); ++s) {
        const double pairs = static_cast<double>(s * (s - (s > 0)) / 2);
        terms.push_back(log_binomial(static_cast<double>(K), static_cast<double>(s)) +
                        log_binomial(pairs, static_cast<double>(k - s)));
      }
      return log_sum_exp(terms);
    }
    case Family::Grouped:
      return grouped_log_counts(space)[k];
    case Family::Explicit: {
      const auto c = count_models(space, k);
      return c == 0 ? ninf : std::log(static_cast<double>(c));
    }
  }
  return ninf;
}

std::uint64_t total_models(const ModelSpace& space, std::size_t kmax) {
  kmax = std::min(kmax, space.p());
  std::uint64_t total = 0;
  for (std::size_t k = 0; k <= kmax; ++k) {
    std::uint64_t c = kSaturated;
    try {
      c = count_models(space, k);
    } catch (const CapacityError&) {
    }
    total = saturating_add(total, c);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Enumeration

namespace {

void combinations(std::size_t p, std::size_t k, const ModelVisitor& visit) {
  std::vector<Index> idx(k);
  std::iota(idx.begin(), idx.end(), Index{0});
  while (true) {
    visit(Model(idx));
    if (k == 0) return;
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == p - k + (i - 1)) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

// Depth-first search over increasing indices; main effects precede
// interactions in index order, so parents are decided before children and
// the visit order is lexicographic.
class HierarchyWalker {
 public:
  HierarchyWalker(const ModelSpace& space, std::size_t k, const ModelVisitor& visit)
      : space_(space), k_(k), visit_(visit), chosen_main_(space.main_effects(), false) {}

  void run() { step(0); }

 private:
  std::size_t admissible_interactions_from(Index j) const {
    std::size_t n = 0;
    for (Index i = std::max(j, space_.main_effects()); i < space_.p(); ++i) {
      const auto [a, b] = space_.parents(i);
      n += chosen_main_[a] && chosen_main_[b];
    }
    return n;
  }

  void step(Index j) {
    if (current_.size() == k_) {
      visit_(Model(current_));
      return;
    }
    const std::size_t need = k_ - current_.size();
    if (j >= space_.p() || space_.p() - j < need) return;
    const std::size_t K = space_.main_effects();
    if (j < K) {
      // Remaining mains plus every interaction is an upper bound on what is still reachable.
      std::size_t reachable_mains = 0;
      for (Index a = 0; a < K; ++a) reachable_mains += chosen_main_[a] || a >= j;
      if (need > (K - j) + reachable_mains * (reachable_mains - (reachable_mains > 0)) / 2) return;
    } else if (admissible_interactions_from(j) < need) {
      return;
    }
    if (j < K || [&] {
          const auto [a, b] = space_.parents(j);
          return chosen_main_[a] && chosen_main_[b];
        }()) {
      current_.push_back(j);
      if (j < K) chosen_main_[j] = true;
      step(j + 1);
      if (j < K) chosen_main_[j] = false;
      current_.pop_back();
    }
    step(j + 1);
  }

  const ModelSpace& space_;
  std::size_t k_;
  const ModelVisitor& visit_;
  std::vector<bool> chosen_main_;
  std::vector<Index> current_;
};

void grouped_models(const ModelSpace& space, std::size_t k, const ModelVisitor& visit) {
  const auto& groups = space.groups();
  std::vector<Model> out;
  std::vector<std::size_t> pick;
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t g, std::size_t size) {
    if (size == k) {
      std::vector<Index> idx;
      for (std::size_t gi : pick) idx.insert(idx.end(), groups[gi].begin(), groups[gi].end());
      out.emplace_back(std::move(idx));
      return;
    }
    if (g == groups.size()) return;
    if (size + groups[g].size() <= k) {
      pick.push_back(g);
      rec(g + 1, size + groups[g].size());
      pick.pop_back();
    }
    rec(g + 1, size);
  };
  rec(0, 0);
  std::sort(out.begin(), out.end());
  for (const auto& m : out) visit(m);
}

}  // namespace

void for_each_model(const ModelSpace& space, std::size_t k, const ModelVisitor& visit) {
  check_size(space, k);
  switch (space.family()) {
    case Family::Complete:
      combinations(space.p(), k, visit);
      return;
    case Family::Ordered: {
      std::vector<Index> idx(k);
      std::iota(idx.begin(), idx.end(), Index{0});
      visit(Model(std::move(idx)));
      return;
    }
    case Family::PairedHierarchy:
      HierarchyWalker(space, k, visit).run();
      return;
    case Family::Grouped:
      grouped_models(space, k, visit);
      return;
    case Family::Explicit:
      for (const auto& m : space.models())
        if (m.size() == k) visit(m);
      return;
  }
}

std::vector<Model> enumerate_models(const ModelSpace& space, std::size_t k) {
  std::vector<Model> out;
  for_each_model(space, k, [&](const Model& m) { out.push_back(m); });
  return out;
}

double lemma1_lower_bound(std::size_t p, std::size_t k) {
  if (k < 3 || p <= k) throw DomainError("lemma1_lower_bound requires k >= 3 and p > k");
  return static_cast<double>(k / 3) * std::log(static_cast<double>(p) / static_cast<double>(k));
}

}  // namespace mapsel
