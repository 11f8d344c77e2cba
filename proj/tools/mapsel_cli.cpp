// mapsel: command-line front end for MAP model selection under structural constraints.
//
// Exit codes: 0 success, 1 usage error, 2 data/config error, 3 capacity error,
// 4 numerical failure. Every error is reported as one line on stderr.

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>

#include "mapsel/em.hpp"
#include "mapsel/errors.hpp"
#include "mapsel/harness.hpp"
#include "mapsel/io.hpp"
#include "mapsel/linalg.hpp"
#include "mapsel/model_space.hpp"
#include "mapsel/penalties.hpp"
#include "mapsel/selector.hpp"

namespace {

using namespace mapsel;

enum ExitCode { kOk = 0, kUsage = 1, kConfig = 2, kCapacity = 3, kNumerical = 4 };

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  return out;
}

void write_json(const io::json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

struct DataOptions {
  std::string path;
  bool header = false;
  bool no_intercept = false;
};

void add_data_options(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--data", d.path, "CSV file: response in column 1, predictors after")->required();
  cmd->add_flag("--header", d.header, "First CSV row is a header");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MAP model selection under structural constraints"};
  app.require_subcommand(1);

  // simulate
  std::string sim_config, sim_out, sim_json;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study over nested polynomial regression");
  simulate->add_option("--config", sim_config, "Simulation JSON config")->required();
  simulate->add_option("--out", sim_out, "Report CSV (stdout if omitted)");
  simulate->add_option("--json", sim_json, "Also write a JSON report with config echo");

  // select
  DataOptions sel_data;
  std::string sel_space, sel_prior, sel_strategy = "exhaustive", sel_out, sel_trace;
  std::optional<double> sel_gamma, sel_lambda;
  double sel_sigma2 = 0.0;
  auto* select_cmd = app.add_subcommand("select", "Penalized least-squares model selection");
  add_data_options(select_cmd, sel_data);
  select_cmd->add_flag("--no-intercept", sel_data.no_intercept, "Do not add an intercept column");
  select_cmd->add_option("--space", sel_space, "Model space JSON")->required();
  select_cmd->add_option("--prior", sel_prior, "Size prior JSON (MAP penalty)");
  select_cmd->add_option("--gamma", sel_gamma, "g-prior scale");
  select_cmd->add_option("--lambda", sel_lambda, "Use the linear penalty 2 sigma^2 lambda k instead of a prior");
  select_cmd->add_option("--sigma2", sel_sigma2, "Noise variance")->required();
  select_cmd->add_option("--strategy", sel_strategy, "exhaustive|greedy")
      ->check(CLI::IsMember({"exhaustive", "greedy"}));
  select_cmd->add_option("--out", sel_out, "Result JSON (stdout if omitted)");
  select_cmd->add_option("--trace", sel_trace, "Per-size trace CSV");

  // penalty-table
  std::string pt_space, pt_prior, pt_out;
  double pt_gamma = 0.0, pt_sigma2 = 0.0;
  std::optional<std::size_t> pt_r;
  std::optional<double> pt_c;
  auto* penalty_table = app.add_subcommand("penalty-table", "Tabulate the prior-induced penalty and its checks");
  penalty_table->add_option("--space", pt_space, "Model space JSON")->required();
  penalty_table->add_option("--prior", pt_prior, "Size prior JSON")->required();
  penalty_table->add_option("--gamma", pt_gamma, "g-prior scale")->required();
  penalty_table->add_option("--sigma2", pt_sigma2, "Noise variance")->required();
  penalty_table->add_option("--r", pt_r, "Largest model size (default p)");
  penalty_table->add_option("--c", pt_c, "Constant of the prior lower bound (default: smallest valid)");
  penalty_table->add_option("--out", pt_out, "Penalty CSV (stdout if omitted)");

  // count-models
  std::string cm_space;
  std::size_t cm_k = 0;
  auto* count_cmd = app.add_subcommand("count-models", "Number of admissible models of size k");
  count_cmd->add_option("--space", cm_space, "Model space JSON")->required();
  count_cmd->add_option("--k", cm_k, "Model size")->required();

  // em-fit
  DataOptions em_data;
  bool em_poly = false;
  double em_sigma2 = 0.0;
  std::string em_out;
  EmOptions em_opts;
  auto* em_cmd = app.add_subcommand("em-fit", "EM estimates of (gamma, q) for nested columns");
  add_data_options(em_cmd, em_data);
  em_cmd->add_flag("--polynomial", em_poly,
                   "Treat the first predictor as x and nest orthonormal polynomials of degree 0..n-1");
  em_cmd->add_option("--sigma2", em_sigma2, "Noise variance")->required();
  em_cmd->add_option("--gamma0", em_opts.gamma0, "Initial gamma");
  em_cmd->add_option("--q0", em_opts.q0, "Initial q");
  em_cmd->add_option("--tol", em_opts.tol, "Convergence tolerance on |dgamma| + |dq|");
  em_cmd->add_option("--max-iter", em_opts.max_iter, "Iteration limit");
  em_cmd->add_option("--out", em_out, "Result JSON (stdout if omitted)");

  // diagnose
  DataOptions dg_data;
  std::size_t dg_kmax = 1;
  auto* diagnose = app.add_subcommand("diagnose", "Rank and sparse eigenvalues of the design");
  add_data_options(diagnose, dg_data);
  diagnose->add_option("--kmax", dg_kmax, "Largest sparsity level")->required()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << one_line(e.what()) << '\n';
    return kUsage;
  }

  try {
    if (*simulate) {
      const auto config = io::load_sim_config(sim_config);
      const auto report = run_simulation(config);
      if (sim_out.empty()) {
        io::write_report_csv(report, std::cout);
      } else {
        auto out = open_output(sim_out);
        io::write_report_csv(report, out);
      }
      if (!sim_json.empty()) write_json(io::report_to_json(report), sim_json);
    } else if (*select_cmd) {
      if (sel_lambda.has_value() == (!sel_prior.empty() || sel_gamma.has_value())) {
        std::cerr << "error: usage: give either --lambda, or both --prior and --gamma\n";
        return kUsage;
      }
      if (!sel_lambda && (sel_prior.empty() || !sel_gamma)) {
        std::cerr << "error: usage: --prior and --gamma must be given together\n";
        return kUsage;
      }
      const auto data = io::load_csv(sel_data.path, sel_data.header);
      const DesignMatrix x(data.x, sel_data.no_intercept ? Intercept::Exclude : Intercept::Include);
      const auto space = io::load_space(sel_space);
      const std::size_t r = std::min(x.rank(), x.p());
      const auto strategy = parse_strategy(sel_strategy);
      SelectionResult result;
      if (sel_lambda) {
        result = select(x, data.y, space, linear_penalty(*sel_lambda, sel_sigma2, r), strategy);
      } else {
        const auto prior = io::load_prior(sel_prior, penalty_log_counts(space, r));
        result = select_map(x, data.y, space, prior, *sel_gamma, sel_sigma2, strategy);
      }
      write_json(io::selection_to_json(result), sel_out);
      if (!sel_trace.empty()) {
        auto out = open_output(sel_trace);
        io::write_trace_csv(result.per_size, out);
      }
    } else if (*penalty_table) {
      const auto space = io::load_space(pt_space);
      const std::size_t r = pt_r.value_or(space.p());
      const auto prior = io::load_prior(pt_prior, penalty_log_counts(space, r));
      const auto pen = map_penalty(space, prior, pt_gamma, pt_sigma2);
      double c = pt_c.value_or(minimal_lower_constant(space, prior));
      if (!(c > 0.0)) c = std::numeric_limits<double>::min();
      const auto conditions = check_prior_conditions(space, prior, pt_gamma, c);
      const auto bounds = penalty_lower_bound_check(pen, space, prior, pt_gamma, pt_sigma2, c);
      if (pt_out.empty()) {
        io::write_penalty_table_csv(space, prior, pen, conditions, bounds, std::cout);
      } else {
        auto out = open_output(pt_out);
        io::write_penalty_table_csv(space, prior, pen, conditions, bounds, out);
      }
    } else if (*count_cmd) {
      std::cout << count_models(io::load_space(cm_space), cm_k) << '\n';
    } else if (*em_cmd) {
      const auto data = io::load_csv(em_data.path, em_data.header);
      Eigen::MatrixXd columns = data.x;
      if (em_poly) {
        if (data.x.cols() < 1) throw ConfigError("--polynomial needs an x column");
        const Eigen::VectorXd t = data.x.col(0);
        columns = orthonormal_polynomial_basis(std::span<const double>(t.data(), static_cast<std::size_t>(t.size())),
                                               static_cast<std::size_t>(t.size()));
      }
      const DesignMatrix x(columns, Intercept::Exclude);
      const auto fit = fit_em(x, data.y, em_sigma2, em_opts);
      write_json(io::em_fit_to_json(fit, lambda_from_estimates(fit.final_state().gamma, fit.final_state().q)), em_out);
    } else if (*diagnose) {
      const auto data = io::load_csv(dg_data.path, dg_data.header);
      const DesignMatrix x(data.x, Intercept::Exclude);
      std::cout << "# rank=" << x.rank() << '\n' << "k,phi_min,phi_max,tau\n";
      for (std::size_t k = 1; k <= dg_kmax; ++k) {
        const auto e = sparse_eigs(x, k);
        std::cout << k << ',' << io::format_double(e.phi_min) << ',' << io::format_double(e.phi_max) << ','
                  << io::format_double(e.tau) << '\n';
      }
    }
  } catch (const CapacityError& e) {
    std::cerr << "error: capacity: " << one_line(e.what()) << '\n';
    return kCapacity;
  } catch (const NumericalError& e) {
    std::cerr << "error: numerical: " << one_line(e.what()) << '\n';
    return kNumerical;
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << one_line(e.what()) << '\n';
    return kConfig;
  } catch (const DomainError& e) {
    std::cerr << "error: data: " << one_line(e.what()) << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << one_line(e.what()) << '\n';
    return kNumerical;
  }
  return kOk;
}
