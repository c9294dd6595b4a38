#ifndef OPTLIN_IO_HPP
#define OPTLIN_IO_HPP

// JSON documents exchanged by the command-line tool. Quantities are in MW,
// MVAr and degrees, and vectors are keyed by original bus numbers.

#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "optlin/acpf_dslack.hpp"
#include "optlin/dcopf_qp.hpp"
#include "optlin/errors.hpp"
#include "optlin/grid_model.hpp"
#include "optlin/lin_coeffs.hpp"

namespace optlin {

using nlohmann::json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  out << content;
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path);
}

inline json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Io, path + ": " + e.what());
  }
}

/// Loads a case from a MATPOWER m-file or from the JSON produced by `convert`.
inline NetworkCase load_case(const std::string& path) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return parse_case_json(json::parse(text));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::MalformedRow, path + ": " + e.what());
    }
  }
  return parse_case(text);
}

namespace detail {

inline void require_format(const json& j, const char* format) {
  if (!j.is_object() || j.value("format", "") != format) {
    throw Error(ErrorKind::InvalidConfig, std::string("expected a JSON object with format \"") + format + "\"");
  }
}

inline std::vector<double> to_std(const VectorXd& v, double scale = 1.0) {
  std::vector<double> out(std::size_t(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[std::size_t(i)] = v[i] * scale;
  return out;
}

/// Reorders a vector keyed by bus ids into internal bus order.
inline VectorXd by_bus(const NetworkCase& net, const std::vector<int>& ids, const std::vector<double>& vals,
                       double scale, const char* what) {
  if (ids.size() != vals.size() || ids.size() != net.num_buses()) {
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + ": need one value per bus");
  }
  VectorXd out = VectorXd::Constant(Eigen::Index(net.num_buses()), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < ids.size(); ++i) out[Eigen::Index(net.index_of(ids[i]))] = vals[i] * scale;
  if (!out.allFinite()) throw Error(ErrorKind::ShapeMismatch, std::string(what) + ": duplicate or non-finite bus entry");
  return out;
}

inline VectorXd by_gen_bus(const NetworkCase& net, const std::vector<int>& ids, const std::vector<double>& vals,
                           double scale, const char* what) {
  if (ids.size() != vals.size() || ids.size() != net.num_gens()) {
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + ": need one value per generator bus");
  }
  VectorXd out = VectorXd::Constant(Eigen::Index(net.num_gens()), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::size_t k = net.index_of(ids[i]);
    if (k >= net.num_gens()) throw Error(ErrorKind::ShapeMismatch, std::string(what) + ": bus has no generator");
    out[Eigen::Index(k)] = vals[i] * scale;
  }
  if (!out.allFinite()) throw Error(ErrorKind::ShapeMismatch, std::string(what) + ": duplicate or non-finite entry");
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Demand and scenario sets.

inline json demand_to_json(const NetworkCase& net, const DemandScenario& d) {
  return {{"format", "optlin-demand"}, {"version", 1}, {"bus", net.bus_ids()},
          {"pd_mw", detail::to_std(d.p_d, net.base_mva)}, {"qd_mvar", detail::to_std(d.q_d, net.base_mva)}};
}

inline DemandScenario demand_from_json(const NetworkCase& net, const json& j) {
  detail::require_format(j, "optlin-demand");
  const auto ids = j.at("bus").get<std::vector<int>>();
  const double s = 1.0 / net.base_mva;
  return {detail::by_bus(net, ids, j.at("pd_mw").get<std::vector<double>>(), s, "pd_mw"),
          detail::by_bus(net, ids, j.at("qd_mvar").get<std::vector<double>>(), s, "qd_mvar")};
}

inline json scenarios_to_json(const NetworkCase& net, const std::vector<DemandScenario>& set) {
  json list = json::array();
  for (const auto& d : set) {
    list.push_back({{"pd_mw", detail::to_std(d.p_d, net.base_mva)}, {"qd_mvar", detail::to_std(d.q_d, net.base_mva)}});
  }
  return {{"format", "optlin-scenarios"}, {"version", 1}, {"case_fingerprint", net.fingerprint()},
          {"bus", net.bus_ids()}, {"scenarios", std::move(list)}};
}

inline std::vector<DemandScenario> scenarios_from_json(const NetworkCase& net, const json& j) {
  detail::require_format(j, "optlin-scenarios");
  const auto ids = j.at("bus").get<std::vector<int>>();
  const double s = 1.0 / net.base_mva;
  std::vector<DemandScenario> out;
  for (const auto& item : j.at("scenarios")) {
    out.push_back({detail::by_bus(net, ids, item.at("pd_mw").get<std::vector<double>>(), s, "pd_mw"),
                   detail::by_bus(net, ids, item.at("qd_mvar").get<std::vector<double>>(), s, "qd_mvar")});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generator dispatches.

inline json dispatch_to_json(const NetworkCase& net, const VectorXd& pg) {
  return {{"format", "optlin-dispatch"}, {"version", 1}, {"gen_bus", net.gen_bus_ids()},
          {"pg_mw", detail::to_std(pg, net.base_mva)}};
}

/// Dispatch (p.u.) and, if present, an embedded "demand" document.
struct DispatchInput {
  VectorXd pg;
  std::optional<DemandScenario> demand;
};

inline DispatchInput dispatch_from_json(const NetworkCase& net, const json& j) {
  detail::require_format(j, "optlin-dispatch");
  DispatchInput in;
  in.pg = detail::by_gen_bus(net, j.at("gen_bus").get<std::vector<int>>(), j.at("pg_mw").get<std::vector<double>>(),
                             1.0 / net.base_mva, "pg_mw");
  if (j.contains("demand")) in.demand = demand_from_json(net, j.at("demand"));
  return in;
}

/// Reference dispatches aligned with a scenario set; null entries are allowed.
inline json references_to_json(const NetworkCase& net, const std::vector<std::optional<VectorXd>>& refs) {
  json list = json::array();
  for (const auto& r : refs) list.push_back(r ? json(detail::to_std(*r, net.base_mva)) : json(nullptr));
  return {{"format", "optlin-reference"}, {"version", 1}, {"gen_bus", net.gen_bus_ids()}, {"pg_mw", std::move(list)}};
}

inline std::vector<std::optional<VectorXd>> references_from_json(const NetworkCase& net, const json& j) {
  detail::require_format(j, "optlin-reference");
  const auto ids = j.at("gen_bus").get<std::vector<int>>();
  std::vector<std::optional<VectorXd>> out;
  for (const auto& item : j.at("pg_mw")) {
    if (item.is_null()) {
      out.emplace_back();
      continue;
    }
    out.emplace_back(detail::by_gen_bus(net, ids, item.get<std::vector<double>>(), 1.0 / net.base_mva, "pg_mw"));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Solver reports.

inline json dcopf_to_json(const NetworkCase& net, const QpCanonical& qp, const QpSolution& sol) {
  const double base = net.base_mva;
  const auto& map = qp.map;
  json upper = json::array(), lower = json::array(), flow = json::array();
  for (std::size_t r = 0; r < map.limit_kind.size(); ++r) {
    const double mu = sol.mu[Eigen::Index(r)] / base;
    switch (map.limit_kind[r]) {
      case LimitKind::PgUpper: upper.push_back({{"bus", net.buses[map.limit_index[r]].id}, {"mu", mu}}); break;
      case LimitKind::PgLower: lower.push_back({{"bus", net.buses[map.limit_index[r]].id}, {"mu", mu}}); break;
      case LimitKind::PfUpper: flow.push_back({{"branch", map.limit_index[r]}, {"side", "upper"}, {"mu", mu}}); break;
      case LimitKind::PfLower: flow.push_back({{"branch", map.limit_index[r]}, {"side", "lower"}, {"mu", mu}}); break;
    }
  }
  std::vector<double> prices(net.num_buses());
  for (std::size_t k = 0; k < net.num_buses(); ++k) prices[k] = sol.lambda[Eigen::Index(map.balance_row(Eigen::Index(k)))] / base;
  return {{"format", "optlin-dcopf"},
          {"version", 1},
          {"dispatch", {{"gen_bus", net.gen_bus_ids()}, {"pg_mw", detail::to_std(sol.pg(map), base)}}},
          {"flows", {{"pf_mw", detail::to_std(sol.pf(map), base)}}},
          {"angles", {{"bus", net.bus_ids()}, {"theta_deg", detail::to_std(sol.theta(map), 180.0 / std::numbers::pi)}}},
          {"duals", {{"balance", prices}, {"gen_upper", upper}, {"gen_lower", lower}, {"flow", flow}}},
          {"objective", sol.objective * base},
          {"iterations", sol.iterations}};
}

inline json pf_to_json(const NetworkCase& net, const PfSteadyState& st) {
  const double base = net.base_mva;
  return {{"format", "optlin-pf"},
          {"version", 1},
          {"zeta_mw", st.zeta * base},
          {"bus", net.bus_ids()},
          {"v", detail::to_std(st.v)},
          {"theta_deg", detail::to_std(st.theta, 180.0 / std::numbers::pi)},
          {"gen_bus", net.gen_bus_ids()},
          {"pg_bar_mw", detail::to_std(st.p_g_bar, base)},
          {"qg_bar_mvar", detail::to_std(st.q_g_bar, base)},
          {"flows", {{"pf_mw", detail::to_std(st.p_f_bar, base)}}},
          {"iterations", st.iterations}};
}

inline PsiCheckpoint load_psi(const std::string& path) { return psi_checkpoint_from_json(read_json(path)); }

}  // namespace optlin

#endif  // OPTLIN_IO_HPP
