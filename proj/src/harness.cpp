#include "mapsel/harness.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>

#include "mapsel/errors.hpp"
#include "mapsel/linalg.hpp"
#include "mapsel/model_space.hpp"
#include "mapsel/penalties.hpp"
#include "mapsel/selector.hpp"

namespace mapsel {

// ---------------------------------------------------------------------------
// Test functions

double g1_raw(double x) { return (x + 0.1) * (x - 0.2) * (x - 0.4) * (x - 0.8) * (x - 1.1); }

double g2_raw(double x) {
  return std::sqrt(x * (1.0 - x)) * std::sin(2.0 * std::numbers::pi * 1.05 / (x + 0.05));
}

namespace {

double raw(const std::string& name, double x) {
  if (name == "g1") return g1_raw(x);
  if (name == "g2") return g2_raw(x);
  throw DomainError("unknown test function '" + name + "'");
}

double quadrature_norm(const std::string& name) {
  auto sq = [&](double x) {
    const double v = raw(name, x);
    return v * v;
  };
  double error = 0.0;
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(sq, 0.0, 1.0, 30, 1e-12, &error);
  return std::sqrt(integral);
}

}  // namespace

double l2_norm(const std::string& name) {
  static std::mutex mu;
  static std::map<std::string, double> cache;
  std::lock_guard lock(mu);
  if (auto it = cache.find(name); it != cache.end()) return it->second;
  const double v = quadrature_norm(name);
  cache.emplace(name, v);
  return v;
}

double g1_l2_norm_exact() {
  // Expand the product of linear factors, square, integrate term by term.
  std::vector<double> poly{1.0};
  for (double root : {-0.1, 0.2, 0.4, 0.8, 1.1}) {
    std::vector<double> next(poly.size() + 1, 0.0);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      next[i + 1] += poly[i];
      next[i] -= root * poly[i];
    }
    poly = std::move(next);
  }
  double integral = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i)
    for (std::size_t j = 0; j < poly.size(); ++j) integral += poly[i] * poly[j] / static_cast<double>(i + j + 1);
  return std::sqrt(integral);
}

double test_function(const std::string& name, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("test functions are defined on [0,1]");
  return raw(name, x) / l2_norm(name);
}

double calibrate_sigma(std::span<const double> signal, double snr) {
  if (!(snr > 0.0)) throw DomainError("snr must be positive");
  if (signal.empty()) throw DomainError("empty signal");
  double ss = 0.0;
  for (double v : signal) ss += v * v;
  if (ss == 0.0) throw DomainError("cannot calibrate noise to an all-zero signal");
  return std::sqrt(ss / static_cast<double>(signal.size())) / snr;
}

// ---------------------------------------------------------------------------
// Configuration

double FunctionSpec::operator()(double x) const {
  if (coefficients.empty()) return test_function(name, x);
  double v = 0.0;
  for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) v = v * x + *it;
  return v;
}

namespace {
std::string short_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}
}  // namespace

// Labels contain no commas so they can sit unquoted in CSV.
std::string MethodSpec::label() const {
  switch (kind) {
    case MethodKind::MapEm: return "MAP";
    case MethodKind::MapFixed: return "MAP(gamma=" + short_number(gamma) + ";q=" + short_number(q) + ")";
    case MethodKind::Aic: return "AIC";
    case MethodKind::Bic: return "BIC";
    case MethodKind::Ric: return "RIC";
    case MethodKind::CustomLambda: return "lambda=" + short_number(lambda);
  }
  return "?";
}

void SimConfig::validate() const {
  if (n < 2) throw ConfigError("n must be at least 2");
  if (replications < 1) throw ConfigError("replications must be at least 1");
  if (functions.empty()) throw ConfigError("no test functions");
  if (methods.empty()) throw ConfigError("no methods");
  for (double s : snr_levels)
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("snr levels must be positive");
  if (snr_levels.empty()) throw ConfigError("no snr levels");
  for (const auto& f : functions)
    if (f.coefficients.empty() && f.name != "g1" && f.name != "g2")
      throw ConfigError("unknown test function '" + f.name + "'");
  for (const auto& m : methods) {
    if (m.kind == MethodKind::MapFixed && (!(m.gamma > 0.0) || !(m.q > 0.0 && m.q < 1.0)))
      throw ConfigError("MAP(fixed) needs gamma > 0 and 0 < q < 1");
    if (m.kind == MethodKind::CustomLambda && !(m.lambda > 0.0)) throw ConfigError("custom lambda must be positive");
  }
}

// ---------------------------------------------------------------------------
// Noise

std::uint64_t replicate_seed(std::uint64_t base_seed, std::uint64_t index) {
  std::uint64_t z = (base_seed ^ index) + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

const char* generator_name() { return "mt19937_64/box-muller (seed = splitmix64(base_seed ^ replicate))"; }

std::vector<double> standard_normals(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 engine(seed);
  auto uniform = [&] { return (static_cast<double>(engine() >> 11) + 0.5) * 0x1.0p-53; };
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; i += 2) {
    const double radius = std::sqrt(-2.0 * std::log(uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    z[i] = radius * std::cos(angle);
    if (i + 1 < n) z[i + 1] = radius * std::sin(angle);
  }
  return z;
}

// ---------------------------------------------------------------------------
// Replicates

namespace {

// Everything about a (function, snr) cell that is shared across replicates.
struct Cell {
  std::string function;
  double snr = 0.0;
  std::vector<double> signal;
  Eigen::VectorXd signal_coords;  // Q' g
  double sigma = 0.0;
};

struct Study {
  Eigen::MatrixXd basis;  // n x n orthonormal polynomial basis, column j = degree j
  ModelSpace space = ModelSpace::ordered(0);
  std::vector<Cell> cells;
};

Eigen::MatrixXd polynomial_design(std::size_t n) {
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) grid[i] = static_cast<double>(i + 1) / static_cast<double>(n);
  return orthonormal_polynomial_basis(grid, n);
}

Study prepare(const SimConfig& config) {
  config.validate();
  Study s;
  s.basis = polynomial_design(config.n);
  s.space = ModelSpace::ordered(config.n);
  for (const auto& f : config.functions) {
    std::vector<double> g(config.n);
    for (std::size_t i = 0; i < config.n; ++i) g[i] = f(static_cast<double>(i + 1) / static_cast<double>(config.n));
    const Eigen::Map<const Eigen::VectorXd> gv(g.data(), static_cast<Eigen::Index>(g.size()));
    const Eigen::VectorXd coords = s.basis.transpose() * gv;
    for (double snr : config.snr_levels) {
      s.cells.push_back({f.name, snr, g, coords, calibrate_sigma(g, snr)});
    }
  }
  return s;
}

std::vector<ReplicateOutcome> replicate_cell(const SimConfig& config, const Study& study, const Cell& cell,
                                             std::span<const double> z) {
  const std::size_t n = config.n;
  const double sigma2 = cell.sigma * cell.sigma;

  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = cell.signal[i] + cell.sigma * z[i];
  const Eigen::VectorXd coords = study.basis.transpose() * y;

  // Nested fit of size k keeps the first k orthonormal coordinates.
  std::vector<double> qf(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) qf[k + 1] = qf[k] + coords(static_cast<Eigen::Index>(k)) * coords(static_cast<Eigen::Index>(k));
  const double yy = qf[n];
  std::vector<SizeEntry> table(n + 1);
  for (std::size_t k = 0; k <= n; ++k) table[k].rss = std::max(0.0, yy - qf[k]);

  auto loss_at = [&](std::size_t k) {
    const Eigen::Index kk = static_cast<Eigen::Index>(k);
    const Eigen::Index nn = static_cast<Eigen::Index>(n);
    return (coords.head(kk) - cell.signal_coords.head(kk)).squaredNorm() +
           cell.signal_coords.tail(nn - kk).squaredNorm();
  };

  std::vector<ReplicateOutcome> out;
  out.reserve(config.methods.size());
  for (const auto& method : config.methods) {
    ReplicateOutcome o;
    std::size_t k = 0;
    auto by_lambda = [&](double lambda) {
      auto t = table;
      return choose_size(t, linear_penalty(lambda, sigma2, n));
    };
    auto by_prior = [&](double gamma, double q) {
      const auto prior = PriorSpec::truncated_geometric(q, penalty_log_counts(study.space, n));
      auto t = table;
      return choose_size(t, map_penalty(study.space, prior, gamma, sigma2));
    };
    switch (method.kind) {
      case MethodKind::MapEm: {
        const auto fit = fit_em(std::span<const double>(qf.data(), n), sigma2, config.em);
        const auto est = lambda_from_estimates(fit.final_state().gamma, fit.final_state().q);
        o.lambda = est.lambda;
        o.gamma_clamped = est.clamped;
        k = by_prior(est.gamma, est.q);
        o.map_linear_agree = k == by_lambda(est.lambda);
        break;
      }
      case MethodKind::MapFixed:
        o.lambda = lambda_map_geometric(method.gamma, method.q);
        k = by_prior(method.gamma, method.q);
        o.map_linear_agree = k == by_lambda(o.lambda);
        break;
      case MethodKind::Aic:
        k = by_lambda(o.lambda = lambda_aic());
        break;
      case MethodKind::Bic:
        k = by_lambda(o.lambda = lambda_bic(n));
        break;
      case MethodKind::Ric:
        k = by_lambda(o.lambda = lambda_ric(n));
        break;
      case MethodKind::CustomLambda:
        k = by_lambda(o.lambda = method.lambda);
        break;
    }
    o.columns = k;
    o.loss = loss_at(k);
    out.push_back(o);
  }
  return out;
}

// outcomes[rep][cell][method]
using Outcomes = std::vector<std::vector<std::vector<ReplicateOutcome>>>;

void run_one(const SimConfig& config, const Study& study, std::size_t rep, Outcomes& outcomes) {
  const auto z = standard_normals(replicate_seed(config.base_seed, rep), config.n);
  auto& slot = outcomes[rep];
  slot.resize(study.cells.size());
  for (std::size_t c = 0; c < study.cells.size(); ++c) slot[c] = replicate_cell(config, study, study.cells[c], z);
}

SimReport aggregate(const SimConfig& config, const Study& study, const Outcomes& outcomes) {
  SimReport report;
  report.config = config;
  report.generator = generator_name();
  const double reps = static_cast<double>(config.replications);
  for (std::size_t c = 0; c < study.cells.size(); ++c) {
    for (std::size_t m = 0; m < config.methods.size(); ++m) {
      SimRow row;
      row.function = study.cells[c].function;
      row.snr = study.cells[c].snr;
      row.method = config.methods[m].label();
      row.sigma = study.cells[c].sigma;
      row.reps = config.replications;
      row.seed = config.base_seed;
      // Replicate order, Kahan-compensated: independent of how replicates were scheduled.
      double sum = 0.0, comp = 0.0, deg = 0.0, lam = 0.0;
      for (const auto& rep : outcomes) {
        const auto& o = rep[c][m];
        const double v = o.loss - comp;
        const double t = sum + v;
        comp = (t - sum) - v;
        sum = t;
        deg += o.columns == 0 ? 0.0 : static_cast<double>(o.columns - 1);
        lam += o.lambda;
        row.gamma_clamped += o.gamma_clamped;
        row.map_linear_mismatch += !o.map_linear_agree;
      }
      row.amse = sum / reps;
      double ss = 0.0;
      for (const auto& rep : outcomes) ss += (rep[c][m].loss - row.amse) * (rep[c][m].loss - row.amse);
      row.se = config.replications > 1 ? std::sqrt(ss / (reps - 1.0) / reps) : 0.0;
      row.amse_per_n = row.amse / static_cast<double>(config.n);
      row.avg_degree = deg / reps;
      row.mean_lambda = lam / reps;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

}  // namespace

std::vector<ReplicateOutcome> run_replicate(const SimConfig& config, std::span<const double> signal, double sigma,
                                            std::span<const double> z) {
  if (signal.size() != config.n || z.size() != config.n) throw DomainError("signal and noise must have length n");
  Study study;
  study.basis = polynomial_design(config.n);
  study.space = ModelSpace::ordered(config.n);
  Cell cell;
  cell.signal.assign(signal.begin(), signal.end());
  const Eigen::Map<const Eigen::VectorXd> gv(signal.data(), static_cast<Eigen::Index>(signal.size()));
  cell.signal_coords = study.basis.transpose() * gv;
  cell.sigma = sigma;
  return replicate_cell(config, study, cell, z);
}

SimReport run_simulation(const SimConfig& config) {
  const Study study = prepare(config);
  Outcomes outcomes(config.replications);
  const long long reps = static_cast<long long>(config.replications);
  std::exception_ptr failure;
  std::size_t failed_rep = 0;
#pragma omp parallel for schedule(dynamic, 1)
  for (long long r = 0; r < reps; ++r) {
    try {
      run_one(config, study, static_cast<std::size_t>(r), outcomes);
    } catch (...) {
#pragma omp critical
      if (!failure || static_cast<std::size_t>(r) < failed_rep) {
        failure = std::current_exception();
        failed_rep = static_cast<std::size_t>(r);
      }
    }
  }
  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const std::exception& e) {
      throw NumericalError("replicate " + std::to_string(failed_rep) + ": " + e.what());
    }
  }
  return aggregate(config, study, outcomes);
}

namespace serial {
SimReport run_simulation(const SimConfig& config) {
  const Study study = prepare(config);
  Outcomes outcomes(config.replications);
  for (std::size_t r = 0; r < config.replications; ++r) {
    try {
      run_one(config, study, r, outcomes);
    } catch (const std::exception& e) {
      throw NumericalError("replicate " + std::to_string(r) + ": " + e.what());
    }
  }
  return aggregate(config, study, outcomes);
}
}  // namespace serial

}  // namespace mapsel
