#include "mapsel/selector.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "mapsel/errors.hpp"

namespace mapsel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_inputs(const DesignMatrix& x, const Eigen::VectorXd& y, const ModelSpace& space, std::size_t r) {
  if (space.p() != x.p()) {
    throw DomainError("model space has p=" + std::to_string(space.p()) + " but design has p=" +
                      std::to_string(x.p()));
  }
  if (static_cast<std::size_t>(y.size()) != x.n()) throw DomainError("response length does not match design");
  if (r > x.p()) throw DomainError("largest size r exceeds p");
}

void check_cap(const ModelSpace& space, std::size_t r) {
  const auto total = total_models(space, r);
  if (total > kEnumerationCap) {
    throw CapacityError("exhaustive search over " + std::to_string(total) + " models exceeds cap " +
                        std::to_string(kEnumerationCap) + "; use the greedy strategy");
  }
}

// Strict "a is better than b" for candidates of one size.
bool better(double rss_a, const Model& a, double rss_b, const Model& b) {
  if (rss_a != rss_b) return rss_a < rss_b;
  return a < b;
}

std::vector<SizeEntry> nested_table(const DesignMatrix& x, const Eigen::VectorXd& y, std::size_t r) {
  const auto qf = nested_quadforms(x, y);
  const double yy = y.squaredNorm();
  std::vector<SizeEntry> table(r + 1);
  for (std::size_t k = 0; k <= r; ++k) {
    std::vector<Index> idx(k);
    for (std::size_t j = 0; j < k; ++j) idx[j] = j;
    table[k].model = Model(std::move(idx));
    table[k].rss = std::max(0.0, yy - qf[k]);
  }
  return table;
}

// ----- Exhaustive ----------------------------------------------------------

SizeEntry scan_size_parallel(const DesignMatrix& x, const Eigen::VectorXd& y, const ModelSpace& space,
                             std::size_t k) {
  const auto models = enumerate_models(space, k);
  std::vector<double> rss(models.size(), kInf);
  const long long count = static_cast<long long>(models.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (long long i = 0; i < count; ++i) {
    rss[static_cast<std::size_t>(i)] = fit_ls(x, y, models[static_cast<std::size_t>(i)]).rss;
  }
  // Reduce in enumeration order so the result does not depend on the schedule.
  SizeEntry best;
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (!std::isfinite(best.rss) || better(rss[i], models[i], best.rss, best.model)) {
      best.rss = rss[i];
      best.model = models[i];
    }
  }
  return best;
}

SizeEntry scan_size_serial(const DesignMatrix& x, const Eigen::VectorXd& y, const ModelSpace& space,
                           std::size_t k) {
  SizeEntry best;
  for_each_model(space, k, [&](const Model& m) {
    const double rss = fit_ls(x, y, m).rss;
    if (!std::isfinite(best.rss) || better(rss, m, best.rss, best.model)) {
      best.rss = rss;
      best.model = m;
    }
  });
  return best;
}

// ----- Greedy --------------------------------------------------------------

struct Move {
  Model next;
  std::size_t added = 0;
};

std::vector<Move> greedy_moves(const ModelSpace& space, const Model& current) {
  std::vector<Move> moves;
  auto extend = [&](std::vector<Index> extra) {
    std::vector<Index> idx(current.indices().begin(), current.indices().end());
    const std::size_t added = extra.size();
    idx.insert(idx.end(), extra.begin(), extra.end());
    moves.push_back({Model(std::move(idx)), added});
  };
  switch (space.family()) {
    case Family::Complete:
      for (Index j = 0; j < space.p(); ++j)
        if (!current.has(j)) extend({j});
      break;
    case Family::Ordered:
      if (current.size() < space.p()) extend({current.size()});
      break;
    case Family::PairedHierarchy:
      for (Index j = 0; j < space.p(); ++j) {
        if (current.has(j)) continue;
        if (!space.is_interaction(j)) {
          extend({j});
          continue;
        }
        // Interaction plus whichever parents are missing.
        const auto [a, b] = space.parents(j);
        std::vector<Index> bundle{j};
        if (!current.has(a)) bundle.push_back(a);
        if (!current.has(b)) bundle.push_back(b);
        extend(std::move(bundle));
      }
      break;
    case Family::Grouped:
      for (const auto& g : space.groups())
        if (!current.has(g.front())) extend(g);
      break;
    case Family::Explicit:
      for (const auto& m : space.models()) {
        if (m.size() <= current.size()) continue;
        if (!std::includes(m.indices().begin(), m.indices().end(), current.indices().begin(),
                           current.indices().end()))
          continue;
        moves.push_back({m, m.size() - current.size()});
      }
      break;
  }
  return moves;
}

template <bool Parallel>
std::vector<SizeEntry> greedy_table(const DesignMatrix& x, const Eigen::VectorXd& y, const ModelSpace& space,
                                    std::size_t r) {
  std::vector<SizeEntry> table(r + 1);
  Model current;
  double current_rss = fit_ls(x, y, current).rss;
  table[0].model = current;
  table[0].rss = current_rss;

  while (true) {
    std::vector<Move> moves = greedy_moves(space, current);
    std::erase_if(moves, [&](const Move& mv) { return mv.next.size() > r; });
    if (moves.empty()) break;

    std::vector<double> rss(moves.size(), kInf);
    const long long count = static_cast<long long>(moves.size());
    if constexpr (Parallel) {
#pragma omp parallel for schedule(dynamic, 4)
      for (long long i = 0; i < count; ++i)
        rss[static_cast<std::size_t>(i)] = fit_ls(x, y, moves[static_cast<std::size_t>(i)].next).rss;
    } else {
      for (long long i = 0; i < count; ++i)
        rss[static_cast<std::size_t>(i)] = fit_ls(x, y, moves[static_cast<std::size_t>(i)].next).rss;
    }

    // Largest RSS reduction per added predictor; then smaller bundle; then lexicographic.
    std::size_t best = 0;
    auto gain = [&](std::size_t i) { return (current_rss - rss[i]) / static_cast<double>(moves[i].added); };
    for (std::size_t i = 1; i < moves.size(); ++i) {
      const double gi = gain(i), gb = gain(best);
      if (gi != gb) {
        if (gi > gb) best = i;
      } else if (moves[i].added != moves[best].added) {
        if (moves[i].added < moves[best].added) best = i;
      } else if (moves[i].next < moves[best].next) {
        best = i;
      }
    }
    current = moves[best].next;
    current_rss = rss[best];
    table[current.size()].model = current;
    table[current.size()].rss = current_rss;
  }
  return table;
}

template <bool Parallel>
std::vector<SizeEntry> best_per_size_impl(const DesignMatrix& x, const Eigen::VectorXd& y, const ModelSpace& space,
                                          std::size_t r, Strategy strategy) {
  check_inputs(x, y, space, r);
  if (space.family() == Family::Ordered) return nested_table(x, y, r);
  if (strategy == Strategy::Greedy) return greedy_table<Parallel>(x, y, space, r);
  check_cap(space, r);
  std::vector<SizeEntry> table(r + 1);
  for (std::size_t k = 0; k <= r; ++k) {
    if (count_models(space, k) == 0) continue;
    table[k] = Parallel ? scan_size_parallel(x, y, space, k) : scan_size_serial(x, y, space, k);
  }
  return table;
}

}  // namespace

std::string strategy_name(Strategy s) { return s == Strategy::Exhaustive ? "exhaustive" : "greedy"; }

Strategy parse_strategy(const std::string& name) {
  if (name == "exhaustive") return Strategy::Exhaustive;
  if (name == "greedy") return Strategy::Greedy;
  throw DomainError("unknown strategy '" + name + "'");
}

std::vector<SizeEntry> best_per_size(const DesignMatrix& x, const Eigen::VectorXd& y, const ModelSpace& space,
                                     std::size_t r, Strategy strategy) {
  return best_per_size_impl<true>(x, y, space, r, strategy);
}

namespace serial {
std::vector<SizeEntry> best_per_size(const DesignMatrix& x, const Eigen::VectorXd& y, const ModelSpace& space,
                                     std::size_t r, Strategy strategy) {
  return best_per_size_impl<false>(x, y, space, r, strategy);
}
}  // namespace serial

std::size_t choose_size(std::vector<SizeEntry>& per_size, const PenaltyFn& pen) {
  if (pen.values.size() != per_size.size()) {
    throw DomainError("penalty covers sizes 0.." + std::to_string(pen.r()) + " but the table has " +
                      std::to_string(per_size.size()) + " sizes");
  }
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < per_size.size(); ++k) {
    auto& e = per_size[k];
    e.penalty = pen(k);
    e.total = std::isfinite(e.rss) ? e.rss + e.penalty : kInf;
    if (std::isnan(e.total)) throw NumericalError("objective is NaN at size " + std::to_string(k));
    // Scanning sizes upward with a strict comparison keeps the smaller size on ties.
    if (std::isfinite(e.total) && (!best || e.total < per_size[*best].total)) best = k;
  }
  if (!best) throw NumericalError("no size has a finite objective");
  return *best;
}

SelectionResult select(const DesignMatrix& x, const Eigen::VectorXd& y, const ModelSpace& space,
                       const PenaltyFn& pen, Strategy strategy) {
  SelectionResult out;
  out.strategy = strategy;
  out.per_size = best_per_size(x, y, space, pen.r(), strategy);
  const std::size_t k = choose_size(out.per_size, pen);
  out.model = out.per_size[k].model;
  out.objective = out.per_size[k].total;
  const auto fit = fit_ls(x, y, out.model);
  out.beta = fit.beta;
  out.intercept = fit.intercept;
  return out;
}

SelectionResult select_map(const DesignMatrix& x, const Eigen::VectorXd& y, const ModelSpace& space,
                           const PriorSpec& prior, double gamma, double sigma2, Strategy strategy) {
  return select(x, y, space, map_penalty(space, prior, gamma, sigma2), strategy);
}

// ---------------------------------------------------------------------------
// Posterior

const PosteriorEntry& PosteriorTable::argmax() const {
  if (entries.empty()) throw DomainError("empty posterior table");
  // Entries are sorted by size then lexicographically; strict > keeps the first on ties.
  const PosteriorEntry* best = &entries.front();
  for (const auto& e : entries)
    if (e.log_weight > best->log_weight) best = &e;
  return *best;
}

PosteriorTable posterior_weights(const DesignMatrix& x, const Eigen::VectorXd& y, const ModelSpace& space,
                                 const PriorSpec& prior, double gamma, double sigma2) {
  if (!(gamma > 0.0) || !(sigma2 > 0.0)) throw DomainError("gamma and sigma2 must be positive");
  const std::size_t r = prior.r();
  check_inputs(x, y, space, r);
  check_cap(space, r);
  const auto log_m = penalty_log_counts(space, r);
  const double shrink = gamma / (gamma + 1.0);
  const double half_log1g = 0.5 * std::log1p(gamma);

  PosteriorTable table;
  for (std::size_t k = 0; k <= r; ++k) {
    if (!std::isfinite(log_m[k])) continue;
    const double log_prior = prior.log_weight(k) - log_m[k] - static_cast<double>(k) * half_log1g;
    for_each_model(space, k, [&](const Model& m) {
      const double qf = quadform(x, y, m);
      table.entries.push_back({m, log_prior + shrink * qf / (2.0 * sigma2), 0.0});
    });
  }
  double mx = -kInf;
  for (const auto& e : table.entries) mx = std::max(mx, e.log_weight);
  if (!std::isfinite(mx)) throw NumericalError("posterior log-weights are not finite");
  double total = 0.0;
  for (auto& e : table.entries) total += (e.weight = std::exp(e.log_weight - mx));
  for (auto& e : table.entries) e.weight /= total;
  return table;
}

}  // namespace mapsel
