#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mapsel/em.hpp"

namespace mapsel {

// --- Test functions --------------------------------------------------------

/// Raw fifth-degree polynomial (x+0.1)(x-0.2)(x-0.4)(x-0.8)(x-1.1).
double g1_raw(double x);
/// Raw Doppler function sqrt(x(1-x)) sin(2 pi 1.05 / (x + 0.05)).
double g2_raw(double x);

/// L2[0,1] norm of a raw test function by adaptive Gauss-Kronrod quadrature, cached.
double l2_norm(const std::string& name);
/// L2[0,1] norm of g1_raw from its expanded coefficients.
double g1_l2_norm_exact();

/// Unit-L2[0,1]-norm versions: name is "g1" or "g2". x must lie in [0,1].
double test_function(const std::string& name, double x);

/// sigma = RMS(signal) / snr.
double calibrate_sigma(std::span<const double> signal, double snr);

// --- Simulation ------------------------------------------------------------

struct FunctionSpec {
  std::string name;                 // "g1", "g2", or a label for custom coefficients
  std::vector<double> coefficients; // custom polynomial sum_j c_j x^j; empty for g1/g2

  double operator()(double x) const;
};

enum class MethodKind { MapEm, MapFixed, Aic, Bic, Ric, CustomLambda };

struct MethodSpec {
  MethodKind kind = MethodKind::Aic;
  double gamma = 1.0;   // MapFixed
  double q = 0.5;       // MapFixed
  double lambda = 1.0;  // CustomLambda

  std::string label() const;
};

struct SimConfig {
  std::size_t n = 100;
  std::vector<FunctionSpec> functions{{"g1", {}}, {"g2", {}}};
  std::vector<double> snr_levels{3.0, 5.0, 7.0};
  std::size_t replications = 100;
  std::vector<MethodSpec> methods{{MethodKind::MapEm}, {MethodKind::Aic}, {MethodKind::Ric}};
  std::uint64_t base_seed = 20130101;
  EmOptions em{};

  void validate() const;
};

struct SimRow {
  std::string function;
  double snr = 0.0;
  std::string method;
  double sigma = 0.0;
  double amse = 0.0;        // mean over replicates of ||g_hat - g||^2 on the design points
  double amse_per_n = 0.0;  // the same divided by n
  double se = 0.0;          // standard error of amse
  double avg_degree = 0.0;  // mean selected polynomial degree (columns - 1)
  double mean_lambda = 0.0;
  std::size_t gamma_clamped = 0;       // MapEm replicates whose gamma hit kGammaFloor
  std::size_t map_linear_mismatch = 0; // MapEm replicates where the prior-induced and linear penalties disagreed
  std::size_t reps = 0;
  std::uint64_t seed = 0;
};

struct SimReport {
  SimConfig config;
  std::string generator;
  std::vector<SimRow> rows;  // function-major, then snr, then method (config order)
};

/// Per-replicate outcome of one method; exposed for tests.
struct ReplicateOutcome {
  double loss = 0.0;
  std::size_t columns = 0;  // selected nested model size
  double lambda = 0.0;
  bool gamma_clamped = false;
  bool map_linear_agree = true;
};

/// Seed of replicate `index`: splitmix64(base_seed xor index).
std::uint64_t replicate_seed(std::uint64_t base_seed, std::uint64_t index);

/// n standard normal draws: mt19937_64 + Box-Muller (the pinned generator).
std::vector<double> standard_normals(std::uint64_t seed, std::size_t n);

/// Name of the pinned noise generator, embedded in reports.
const char* generator_name();

/// Runs every method on one replicate with noise `z` (standard normal) scaled by sigma.
std::vector<ReplicateOutcome> run_replicate(const SimConfig& config, std::span<const double> signal, double sigma,
                                            std::span<const double> z);

/// Full Monte Carlo study. Replicates run in parallel; aggregation is in
/// replicate order, so the report is bit-identical for a given base_seed.
SimReport run_simulation(const SimConfig& config);

namespace serial {
SimReport run_simulation(const SimConfig& config);
}  // namespace serial

}  // namespace mapsel
