#include "mapsel/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "mapsel/errors.hpp"

namespace mapsel::io {

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return in;
}

json parse_file(const std::string& path) {
  auto in = open_input(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in '" + path + "': " + e.what());
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

template <typename T>
T require(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

std::vector<Model> models_from_json(const json& arr) {
  std::vector<Model> out;
  for (const auto& m : arr) out.emplace_back(m.get<std::vector<Index>>());
  return out;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// CSV data

Dataset read_csv(std::istream& in, bool header) {
  Dataset d;
  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_csv_line(line);
    if (header && d.names.empty() && rows.empty()) {
      d.names = std::move(cells);
      continue;
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line_no) + ": cannot parse '" + c + "' as a number");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected " + std::to_string(rows.front().size()) +
                        " columns, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("no data rows");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto cols = static_cast<Eigen::Index>(rows.front().size());
  if (cols < 1) throw ConfigError("data needs a response column");
  d.y.resize(n);
  d.x.resize(n, cols - 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.y(i) = rows[static_cast<std::size_t>(i)][0];
    for (Eigen::Index j = 1; j < cols; ++j) d.x(i, j - 1) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return d;
}

Dataset load_csv(const std::string& path, bool header) {
  auto in = open_input(path);
  return read_csv(in, header);
}

// ---------------------------------------------------------------------------
// Model spaces

ModelSpace space_from_json(const json& j) {
  try {
    if (!j.contains("family")) {
      if (j.contains("models")) return ModelSpace::explicit_list(require<std::size_t>(j, "p"), models_from_json(j.at("models")));
      throw ConfigError("space config needs 'family'");
    }
    const auto family = require<std::string>(j, "family");
    if (family == "complete") return ModelSpace::complete(require<std::size_t>(j, "p"));
    if (family == "ordered") return ModelSpace::ordered(require<std::size_t>(j, "p"));
    if (family == "paired_hierarchy") {
      const auto space = ModelSpace::paired_hierarchy(require<std::size_t>(j, "K"));
      if (j.contains("p") && j.at("p").get<std::size_t>() != space.p()) {
        throw ConfigError("paired hierarchy with K main effects has p = K(K+1)/2 = " + std::to_string(space.p()));
      }
      return space;
    }
    if (family == "grouped") {
      return ModelSpace::grouped(require<std::size_t>(j, "p"), require<std::vector<std::vector<Index>>>(j, "groups"));
    }
    if (family == "explicit") return ModelSpace::explicit_list(require<std::size_t>(j, "p"), models_from_json(j.at("models")));
    throw ConfigError("unknown space family '" + family + "'");
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad space config: ") + e.what());
  }
}

ModelSpace load_space(const std::string& path) { return space_from_json(parse_file(path)); }

json space_to_json(const ModelSpace& space) {
  json j{{"family", family_name(space.family())}, {"p", space.p()}};
  switch (space.family()) {
    case Family::PairedHierarchy:
      j["K"] = space.main_effects();
      break;
    case Family::Grouped:
      j["groups"] = space.groups();
      break;
    case Family::Explicit: {
      json models = json::array();
      for (const auto& m : space.models()) models.push_back(std::vector<Index>(m.indices().begin(), m.indices().end()));
      j["models"] = std::move(models);
      break;
    }
    default:
      break;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Priors

PriorSpec prior_from_json(const json& j, std::span<const double> log_counts) {
  try {
    const auto kind = require<std::string>(j, "kind");
    if (kind == "geometric") return PriorSpec::truncated_geometric(require<double>(j, "q"), log_counts);
    if (kind == "uniform") return PriorSpec::uniform(log_counts);
    if (kind == "custom") {
      const auto w = require<std::vector<double>>(j, "weights");
      if (w.size() != log_counts.size()) {
        throw ConfigError("custom prior has " + std::to_string(w.size()) + " weights; expected r+1 = " +
                          std::to_string(log_counts.size()));
      }
      return PriorSpec::custom(w);
    }
    throw ConfigError("unknown prior kind '" + kind + "'");
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
}

PriorSpec load_prior(const std::string& path, std::span<const double> log_counts) {
  return prior_from_json(parse_file(path), log_counts);
}

// ---------------------------------------------------------------------------
// Simulation config and report

SimConfig sim_config_from_json(const json& j) {
  SimConfig c;
  try {
    if (j.contains("n")) c.n = j.at("n").get<std::size_t>();
    if (j.contains("replications")) c.replications = j.at("replications").get<std::size_t>();
    if (j.contains("snr_levels")) c.snr_levels = j.at("snr_levels").get<std::vector<double>>();
    if (j.contains("base_seed")) c.base_seed = j.at("base_seed").get<std::uint64_t>();
    if (j.contains("functions")) {
      c.functions.clear();
      for (const auto& f : j.at("functions")) {
        if (f.is_string()) {
          c.functions.push_back({f.get<std::string>(), {}});
        } else {
          c.functions.push_back({f.value("name", std::string("custom")), require<std::vector<double>>(f, "coefficients")});
        }
      }
    }
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j.at("methods")) {
        const auto kind = m.is_string() ? m.get<std::string>() : require<std::string>(m, "kind");
        MethodSpec spec;
        if (kind == "map_em" || kind == "map") {
          spec.kind = MethodKind::MapEm;
        } else if (kind == "map_fixed") {
          spec.kind = MethodKind::MapFixed;
          spec.gamma = require<double>(m, "gamma");
          spec.q = require<double>(m, "q");
        } else if (kind == "aic") {
          spec.kind = MethodKind::Aic;
        } else if (kind == "bic") {
          spec.kind = MethodKind::Bic;
        } else if (kind == "ric") {
          spec.kind = MethodKind::Ric;
        } else if (kind == "lambda") {
          spec.kind = MethodKind::CustomLambda;
          spec.lambda = require<double>(m, "lambda");
        } else {
          throw ConfigError("unknown method '" + kind + "'");
        }
        c.methods.push_back(spec);
      }
    }
    if (j.contains("em")) {
      const auto& e = j.at("em");
      c.em.gamma0 = e.value("gamma0", c.em.gamma0);
      c.em.q0 = e.value("q0", c.em.q0);
      c.em.tol = e.value("tol", c.em.tol);
      c.em.max_iter = e.value("max_iter", c.em.max_iter);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad simulation config: ") + e.what());
  }
  c.validate();
  return c;
}

SimConfig load_sim_config(const std::string& path) { return sim_config_from_json(parse_file(path)); }

json sim_config_to_json(const SimConfig& c) {
  json functions = json::array();
  for (const auto& f : c.functions) {
    if (f.coefficients.empty()) functions.push_back(f.name);
    else functions.push_back({{"name", f.name}, {"coefficients", f.coefficients}});
  }
  json methods = json::array();
  for (const auto& m : c.methods) {
    switch (m.kind) {
      case MethodKind::MapEm: methods.push_back("map_em"); break;
      case MethodKind::MapFixed: methods.push_back({{"kind", "map_fixed"}, {"gamma", m.gamma}, {"q", m.q}}); break;
      case MethodKind::Aic: methods.push_back("aic"); break;
      case MethodKind::Bic: methods.push_back("bic"); break;
      case MethodKind::Ric: methods.push_back("ric"); break;
      case MethodKind::CustomLambda: methods.push_back({{"kind", "lambda"}, {"lambda", m.lambda}}); break;
    }
  }
  return {{"n", c.n},
          {"replications", c.replications},
          {"snr_levels", c.snr_levels},
          {"base_seed", c.base_seed},
          {"functions", functions},
          {"methods", methods},
          {"em", {{"gamma0", c.em.gamma0}, {"q0", c.em.q0}, {"tol", c.em.tol}, {"max_iter", c.em.max_iter}}}};
}

void write_report_csv(const SimReport& report, std::ostream& out) {
  out << "function,snr,method,amse,amse_per_n,se,avg_degree,reps,seed\n";
  for (const auto& r : report.rows) {
    out << r.function << ',' << format_double(r.snr) << ',' << r.method << ',' << format_double(r.amse) << ','
        << format_double(r.amse_per_n) << ',' << format_double(r.se) << ',' << format_double(r.avg_degree) << ','
        << r.reps << ',' << r.seed << '\n';
  }
}

json report_to_json(const SimReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"function", r.function},
                    {"snr", r.snr},
                    {"method", r.method},
                    {"sigma", r.sigma},
                    {"amse", r.amse},
                    {"amse_per_n", r.amse_per_n},
                    {"se", r.se},
                    {"avg_degree", r.avg_degree},
                    {"mean_lambda", r.mean_lambda},
                    {"gamma_clamped", r.gamma_clamped},
                    {"map_linear_mismatch", r.map_linear_mismatch},
                    {"reps", r.reps},
                    {"seed", r.seed}});
  }
  return {{"config", sim_config_to_json(report.config)}, {"generator", report.generator}, {"rows", rows}};
}

// ---------------------------------------------------------------------------
// Selection output

json selection_to_json(const SelectionResult& result) {
  json per_size = json::array();
  for (std::size_t k = 0; k < result.per_size.size(); ++k) {
    const auto& e = result.per_size[k];
    json row{{"k", k}};
    if (std::isfinite(e.rss)) {
      row["rss"] = e.rss;
      row["model"] = std::vector<Index>(e.model.indices().begin(), e.model.indices().end());
    } else {
      row["rss"] = nullptr;
    }
    row["penalty"] = std::isfinite(e.penalty) ? json(e.penalty) : json(nullptr);
    row["total"] = std::isfinite(e.total) ? json(e.total) : json(nullptr);
    per_size.push_back(std::move(row));
  }
  return {{"model", std::vector<Index>(result.model.indices().begin(), result.model.indices().end())},
          {"size", result.model.size()},
          {"objective", result.objective},
          {"intercept", result.intercept},
          {"beta", std::vector<double>(result.beta.data(), result.beta.data() + result.beta.size())},
          {"strategy", strategy_name(result.strategy)},
          {"per_size", per_size}};
}

void write_trace_csv(const std::vector<SizeEntry>& per_size, std::ostream& out) {
  out << "k,rss,penalty,total,model\n";
  for (std::size_t k = 0; k < per_size.size(); ++k) {
    const auto& e = per_size[k];
    std::string model = std::isfinite(e.rss) ? e.model.to_string() : "";
    for (char& ch : model)
      if (ch == ',') ch = ' ';
    out << k << ',' << format_double(e.rss) << ',' << format_double(e.penalty) << ',' << format_double(e.total)
        << ',' << model << '\n';
  }
}

void write_penalty_table_csv(const ModelSpace& space, const PriorSpec& prior, const PenaltyFn& pen,
                             const PriorConditionReport& conditions, const PenaltyBoundReport& bounds,
                             std::ostream& out) {
  const auto log_m = penalty_log_counts(space, prior.r());
  out << "k,m_k,pi_k,pen_k,L_k,lower_ok,upper_ok,L_ok,risk_ok,pen_lower_ok,pen_upper_ok\n";
  auto flag = [](bool b) { return b ? "1" : "0"; };
  for (std::size_t k = 0; k <= prior.r(); ++k) {
    // Exact integer count when it fits in 64 bits; m(r) is 1 by convention.
    std::string m_text;
    if (!std::isfinite(log_m[k])) {
      m_text = "0";
    } else if (k == prior.r()) {
      m_text = "1";
    } else {
      try {
        m_text = std::to_string(count_models(space, k));
      } catch (const CapacityError&) {
        m_text = format_double(std::exp(log_m[k]));
      }
    }
    out << k << ',' << m_text << ','
        << format_double(prior.weight(k)) << ',' << format_double(pen(k));
    const PriorConditionRow* c = nullptr;
    for (const auto& row : conditions.rows)
      if (row.k == k) c = &row;
    const PenaltyBoundRow* b = nullptr;
    for (const auto& row : bounds.rows)
      if (row.k == k) b = &row;
    if (c) {
      out << ',' << format_double(c->l_k) << ',' << flag(c->lower_ok) << ',' << flag(c->upper_ok) << ','
          << flag(c->l_k_ok) << ',' << flag(c->risk_condition_ok);
    } else {
      out << ",,,,,";
    }
    if (b) out << ',' << flag(b->lower_ok) << ',' << flag(b->upper_ok) << '\n';
    else out << ",,\n";
  }
}

json em_fit_to_json(const EmFit& fit, const MapLambda& lambda) {
  const auto& s = fit.final_state();
  return {{"gamma", s.gamma},
          {"q", s.q},
          {"gamma_used", lambda.gamma},
          {"lambda_map", lambda.lambda},
          {"iterations", s.iteration},
          {"converged", fit.converged},
          {"clamped", lambda.clamped},
          {"loglik", s.loglik},
          {"init", {{"gamma0", fit.options.gamma0}, {"q0", fit.options.q0}}},
          {"tol", fit.options.tol},
          {"max_iter", fit.options.max_iter}};
}

}  // namespace mapsel::io
