#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mapsel/em.hpp"
#include "mapsel/harness.hpp"
#include "mapsel/model_space.hpp"
#include "mapsel/penalties.hpp"
#include "mapsel/selector.hpp"

namespace mapsel::io {

using nlohmann::json;

/// Response in the first column, predictors in the rest.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  std::vector<std::string> names;  // column names when a header was read
};

Dataset read_csv(std::istream& in, bool header);
Dataset load_csv(const std::string& path, bool header);

/// {"family": "complete"|"ordered"|"paired_hierarchy"|"grouped"|"explicit", ...}.
/// A bare {"p": int, "models": [[...], ...]} is read as an explicit space.
ModelSpace space_from_json(const json& j);
ModelSpace load_space(const std::string& path);
json space_to_json(const ModelSpace& space);

/// {"kind": "geometric", "q": 0.5} | {"kind": "uniform"} | {"kind": "custom", "weights": [...]}.
/// Geometric and uniform priors are resolved against the attainable sizes in `log_counts`.
PriorSpec prior_from_json(const json& j, std::span<const double> log_counts);
PriorSpec load_prior(const std::string& path, std::span<const double> log_counts);

SimConfig sim_config_from_json(const json& j);
SimConfig load_sim_config(const std::string& path);
json sim_config_to_json(const SimConfig& config);

/// Header: function,snr,method,amse,amse_per_n,se,avg_degree,reps,seed.
void write_report_csv(const SimReport& report, std::ostream& out);
json report_to_json(const SimReport& report);

json selection_to_json(const SelectionResult& result);
/// Header: k,rss,penalty,total,model.
void write_trace_csv(const std::vector<SizeEntry>& per_size, std::ostream& out);

/// Header: k,m_k,pi_k,pen_k,L_k,lower_ok,upper_ok,L_ok,risk_ok,pen_lower_ok,pen_upper_ok.
void write_penalty_table_csv(const ModelSpace& space, const PriorSpec& prior, const PenaltyFn& pen,
                             const PriorConditionReport& conditions, const PenaltyBoundReport& bounds,
                             std::ostream& out);

json em_fit_to_json(const EmFit& fit, const MapLambda& lambda);

/// Shortest-roundtrip-safe formatting: 17 significant digits.
std::string format_double(double v);

}  // namespace mapsel::io
