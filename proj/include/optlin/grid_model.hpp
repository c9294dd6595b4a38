#ifndef OPTLIN_GRID_MODEL_HPP
#define OPTLIN_GRID_MODEL_HPP

// Network data model: MATPOWER case ingestion, per-unit conversion, bus
// renumbering (generator buses first), incidence and admittance operators,
// and demand scenario sampling.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "optlin/errors.hpp"

namespace optlin {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Raw MATPOWER tables (source units, original bus numbers).

struct MatpowerRow {
  std::vector<double> values;
  int line = 0;  // 1-based source line, 0 when not from a text file
};

struct MatpowerData {
  double base_mva = 100.0;
  std::vector<MatpowerRow> bus, gen, branch, gencost;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\'') in_string = !in_string;
    if (line[i] == '%' && !in_string) return line.substr(0, i);
  }
  return line;
}

inline std::optional<double> parse_number(std::string_view tok) {
  if (tok.empty()) return std::nullopt;
  if (tok.front() == '+') tok.remove_prefix(1);
  std::string_view t = tok;
  bool neg = false;
  if (!t.empty() && t.front() == '-') {
    neg = true;
    t.remove_prefix(1);
  }
  if (t == "Inf" || t == "inf") return neg ? -std::numeric_limits<double>::infinity()
                                           : std::numeric_limits<double>::infinity();
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) return std::nullopt;
  return value;
}

inline void append_row_tokens(std::string_view text, int line, std::vector<MatpowerRow>& rows,
                              MatpowerRow& pending) {
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == ';') {
      if (!pending.values.empty()) rows.push_back(std::move(pending));
      pending = MatpowerRow{};
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) && text[j] != ',' &&
           text[j] != ';')
      ++j;
    auto tok = text.substr(i, j - i);
    auto value = parse_number(tok);
    if (!value) {
      throw Error(ErrorKind::MalformedRow,
                  "line " + std::to_string(line) + ": cannot parse '" + std::string(tok) + "'");
    }
    if (pending.values.empty()) pending.line = line;
    pending.values.push_back(*value);
    i = j;
  }
}

}  // namespace detail

/// Reads the `baseMVA`, `bus`, `gen`, `branch` and `gencost` blocks of a
/// MATPOWER m-file. Other blocks are ignored.
inline MatpowerData parse_matpower_text(std::string_view text) {
  MatpowerData data;
  bool have_base = false;
  std::map<std::string, std::vector<MatpowerRow>*> targets{
      {"bus", &data.bus}, {"gen", &data.gen}, {"branch", &data.branch}, {"gencost", &data.gencost}};
  std::map<std::string, bool> seen;

  std::vector<MatpowerRow>* block = nullptr;
  MatpowerRow pending;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = detail::strip_comment(text.substr(pos, eol - pos));
    ++line_no;
    pos = eol + 1;

    if (block != nullptr) {
      auto close = line.find(']');
      auto body = close == std::string_view::npos ? line : line.substr(0, close);
      detail::append_row_tokens(body, line_no, *block, pending);
      // A newline also terminates a row.
      if (!pending.values.empty()) {
        block->push_back(std::move(pending));
        pending = MatpowerRow{};
      }
      if (close != std::string_view::npos) block = nullptr;
      continue;
    }

    auto trimmed = detail::trim(line);
    if (!trimmed.starts_with("mpc.")) continue;
    auto eq = trimmed.find('=');
    if (eq == std::string_view::npos) continue;
    std::string name(detail::trim(trimmed.substr(4, eq - 4)));
    auto rhs = detail::trim(trimmed.substr(eq + 1));

    if (name == "baseMVA") {
      if (!rhs.empty() && rhs.back() == ';') rhs.remove_suffix(1);
      auto value = detail::parse_number(detail::trim(rhs));
      if (!value) throw Error(ErrorKind::MalformedRow, "line " + std::to_string(line_no) + ": bad baseMVA");
      data.base_mva = *value;
      have_base = true;
      continue;
    }
    auto it = targets.find(name);
    if (it == targets.end() || rhs.empty() || rhs.front() != '[') continue;
    seen[name] = true;
    block = it->second;
    rhs.remove_prefix(1);
    auto close = rhs.find(']');
    auto body = close == std::string_view::npos ? rhs : rhs.substr(0, close);
    detail::append_row_tokens(body, line_no, *block, pending);
    if (!pending.values.empty()) {
      block->push_back(std::move(pending));
      pending = MatpowerRow{};
    }
    if (close != std::string_view::npos) block = nullptr;
  }
  if (block != nullptr) throw Error(ErrorKind::MalformedRow, "unterminated matrix block at end of file");
  if (!have_base) throw Error(ErrorKind::MissingBlock, "baseMVA");
  for (const char* name : {"bus", "gen", "branch", "gencost"}) {
    if (!seen[name]) throw Error(ErrorKind::MissingBlock, name);
  }
  return data;
}

inline std::string to_matpower_text(const MatpowerData& data, std::string_view name = "case") {
  std::ostringstream out;
  out.precision(17);
  out << "function mpc = " << name << "\n\nmpc.version = '2';\nmpc.baseMVA = " << data.base_mva << ";\n";
  auto block = [&](const char* label, const std::vector<MatpowerRow>& rows) {
    out << "\nmpc." << label << " = [\n";
    for (const auto& row : rows) {
      for (double v : row.values) out << '\t' << v;
      out << ";\n";
    }
    out << "];\n";
  };
  block("bus", data.bus);
  block("gen", data.gen);
  block("branch", data.branch);
  block("gencost", data.gencost);
  return out.str();
}

/// JSON mirror of the m-file: the same five tables as arrays of rows.
inline nlohmann::json to_json(const MatpowerData& data) {
  nlohmann::json j;
  j["format"] = "optlin-case";
  j["version"] = 1;
  j["baseMVA"] = data.base_mva;
  auto table = [](const std::vector<MatpowerRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) arr.push_back(r.values);
    return arr;
  };
  j["bus"] = table(data.bus);
  j["gen"] = table(data.gen);
  j["branch"] = table(data.branch);
  j["gencost"] = table(data.gencost);
  return j;
}

inline MatpowerData matpower_from_json(const nlohmann::json& j) {
  MatpowerData data;
  if (!j.contains("baseMVA")) throw Error(ErrorKind::MissingBlock, "baseMVA");
  data.base_mva = j.at("baseMVA").get<double>();
  auto read = [&](const char* name, std::vector<MatpowerRow>& rows) {
    if (!j.contains(name)) throw Error(ErrorKind::MissingBlock, name);
    int index = 0;
    for (const auto& r : j.at(name)) {
      ++index;
      if (!r.is_array()) throw Error(ErrorKind::MalformedRow, std::string(name) + " row " + std::to_string(index));
      MatpowerRow row;
      for (const auto& v : r) {
        if (!v.is_number()) {
          throw Error(ErrorKind::MalformedRow, std::string(name) + " row " + std::to_string(index));
        }
        row.values.push_back(v.get<double>());
      }
      rows.push_back(std::move(row));
    }
  };
  read("bus", data.bus);
  read("gen", data.gen);
  read("branch", data.branch);
  read("gencost", data.gencost);
  return data;
}

// ---------------------------------------------------------------------------
// Network model (per-unit, internal numbering).

/// Quantities are per-unit on `base_mva`; angles in radians.
struct BusRecord {
  int id = 0;  // original bus number
  int type = 1;
  double pd = 0, qd = 0, gs = 0, bs = 0;
  double vm = 1, va = 0, base_kv = 0, vmax = 1.1, vmin = 0.9;
};

struct BranchRecord {
  std::size_t from = 0, to = 0;  // internal 0-based bus indices
  double r = 0, x = 0, b_sh = 0;
  double tap = 1.0, shift = 0.0;
  double p_f_max = std::numeric_limits<double>::infinity();
};

/// One equivalent unit per generator bus. Costs are normalized so that the
/// per-unit cost c2*p^2 + c1*p + c0 equals the $/h cost divided by baseMVA.
struct GenRecord {
  std::size_t bus = 0;
  double pg = 0, qg = 0, qmax = 0, qmin = 0, vg = 1;
  double pmax = 0, pmin = 0;
  double c2 = 0, c1 = 0, c0 = 0;
  int units = 1;
};

struct DemandScenario {
  VectorXd p_d;
  VectorXd q_d;
};

class NetworkCase {
 public:
  double base_mva = 100.0;
  std::vector<BusRecord> buses;
  std::vector<BranchRecord> branches;
  std::vector<GenRecord> gens;  // gens[i].bus == i

  std::size_t num_buses() const { return buses.size(); }
  std::size_t num_branches() const { return branches.size(); }
  std::size_t num_gens() const { return gens.size(); }

  /// Internal index of an original bus number.
  std::size_t index_of(int bus_id) const {
    for (std::size_t k = 0; k < buses.size(); ++k)
      if (buses[k].id == bus_id) return k;
    throw Error(ErrorKind::InvalidCase, "unknown bus id " + std::to_string(bus_id));
  }

  std::vector<int> bus_ids() const {
    std::vector<int> ids;
    for (const auto& b : buses) ids.push_back(b.id);
    return ids;
  }

  std::vector<int> gen_bus_ids() const {
    std::vector<int> ids;
    for (const auto& g : gens) ids.push_back(buses[g.bus].id);
    return ids;
  }

  VectorXd cost() const {
    VectorXd c(gens.size());
    for (std::size_t i = 0; i < gens.size(); ++i) c[i] = gens[i].c2;
    return c;
  }
  VectorXd pg_max() const {
    VectorXd v(gens.size());
    for (std::size_t i = 0; i < gens.size(); ++i) v[i] = gens[i].pmax;
    return v;
  }
  VectorXd v_g_ref() const {
    VectorXd v(gens.size());
    for (std::size_t i = 0; i < gens.size(); ++i) v[i] = gens[i].vg;
    return v;
  }
  VectorXd pf_max() const {
    VectorXd v(branches.size());
    for (std::size_t e = 0; e < branches.size(); ++e) v[e] = branches[e].p_f_max;
    return v;
  }
  VectorXd reactance() const {
    VectorXd v(branches.size());
    for (std::size_t e = 0; e < branches.size(); ++e) v[e] = branches[e].x;
    return v;
  }

  /// alpha = pg_max / sum(pg_max)
  VectorXd participation() const {
    VectorXd p = pg_max();
    return p / p.sum();
  }

  DemandScenario nominal_demand() const {
    DemandScenario d{VectorXd(buses.size()), VectorXd(buses.size())};
    for (std::size_t k = 0; k < buses.size(); ++k) {
      d.p_d[k] = buses[k].pd;
      d.q_d[k] = buses[k].qd;
    }
    return d;
  }

  /// 64-bit FNV-1a over the model's numeric content, as 16 hex digits.
  std::string fingerprint() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](const void* p, std::size_t n) {
      const auto* bytes = static_cast<const unsigned char*>(p);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ull;
      }
    };
    auto f = [&](double v) { mix(&v, sizeof v); };
    auto u = [&](std::uint64_t v) { mix(&v, sizeof v); };
    f(base_mva);
    u(buses.size());
    for (const auto& b : buses) {
      u(static_cast<std::uint64_t>(b.id));
      f(b.pd), f(b.qd), f(b.gs), f(b.bs);
    }
    u(branches.size());
    for (const auto& br : branches) {
      u(br.from), u(br.to);
      f(br.r), f(br.x), f(br.b_sh), f(br.tap), f(br.shift), f(br.p_f_max);
    }
    u(gens.size());
    for (const auto& g : gens) {
      u(g.bus);
      f(g.pmax), f(g.pmin), f(g.vg), f(g.c2), f(g.c1), f(g.c0);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }
};

namespace detail {

inline void require_columns(const MatpowerRow& row, std::size_t n, const char* block) {
  if (row.values.size() < n) {
    throw Error(ErrorKind::MalformedRow, std::string(block) + " row at line " + std::to_string(row.line) +
                                             ": expected at least " + std::to_string(n) + " columns, got " +
                                             std::to_string(row.values.size()));
  }
}

inline int as_int(double v, const MatpowerRow& row, const char* block) {
  if (!std::isfinite(v) || std::round(v) != v) {
    throw Error(ErrorKind::MalformedRow,
                std::string(block) + " row at line " + std::to_string(row.line) + ": expected an integer");
  }
  return static_cast<int>(v);
}

}  // namespace detail

/// Builds the internal model. Generator buses take internal indices
/// 0..Ng-1 in order of first appearance in the gen table; remaining buses
/// follow in file order. Several in-service units on one bus are merged
/// into one equivalent unit.
inline NetworkCase build_case(const MatpowerData& data) {
  if (!(data.base_mva > 0)) throw Error(ErrorKind::InvalidCase, "baseMVA must be positive");
  const double base = data.base_mva;
  NetworkCase net;
  net.base_mva = base;

  std::vector<BusRecord> raw_buses;
  std::map<int, std::size_t> raw_index;
  for (const auto& row : data.bus) {
    detail::require_columns(row, 13, "bus");
    const auto& v = row.values;
    BusRecord b;
    b.id = detail::as_int(v[0], row, "bus");
    b.type = detail::as_int(v[1], row, "bus");
    if (b.type == 4) throw Error(ErrorKind::InvalidCase, "isolated bus " + std::to_string(b.id) + " not supported");
    b.pd = v[2] / base;
    b.qd = v[3] / base;
    b.gs = v[4] / base;
    b.bs = v[5] / base;
    b.vm = v[7];
    b.va = v[8] * std::numbers::pi / 180.0;
    b.base_kv = v[9];
    b.vmax = v[11];
    b.vmin = v[12];
    if (!raw_index.emplace(b.id, raw_buses.size()).second) {
      throw Error(ErrorKind::MalformedRow, "bus row at line " + std::to_string(row.line) + ": duplicate bus id");
    }
    raw_buses.push_back(b);
  }
  if (raw_buses.empty()) throw Error(ErrorKind::InvalidCase, "no buses");

  if (data.gencost.size() < data.gen.size()) {
    throw Error(ErrorKind::MalformedRow, "gencost has fewer rows than gen");
  }

  // Generators, merged per bus.
  std::vector<int> gen_bus_order;
  std::map<int, std::vector<GenRecord>> units;
  for (std::size_t i = 0; i < data.gen.size(); ++i) {
    const auto& row = data.gen[i];
    detail::require_columns(row, 10, "gen");
    const auto& v = row.values;
    if (v[7] <= 0) continue;  // out of service
    int bus_id = detail::as_int(v[0], row, "gen");
    if (!raw_index.contains(bus_id)) {
      throw Error(ErrorKind::MalformedRow, "gen row at line " + std::to_string(row.line) + ": unknown bus " +
                                               std::to_string(bus_id));
    }
    const auto& crow = data.gencost[i];
    detail::require_columns(crow, 4, "gencost");
    const auto& c = crow.values;
    if (detail::as_int(c[0], crow, "gencost") != 2) {
      throw Error(ErrorKind::UnsupportedCost, "gencost row at line " + std::to_string(crow.line) +
                                                  ": only polynomial (MODEL=2) costs are supported");
    }
    int ncost = detail::as_int(c[3], crow, "gencost");
    if (ncost < 1 || ncost > 3) {
      throw Error(ErrorKind::UnsupportedCost,
                  "gencost row at line " + std::to_string(crow.line) + ": polynomial degree above 2");
    }
    detail::require_columns(crow, 4 + static_cast<std::size_t>(ncost), "gencost");
    double coef[3] = {0, 0, 0};  // c2, c1, c0
    for (int k = 0; k < ncost; ++k) coef[3 - ncost + k] = c[4 + k];

    GenRecord g;
    g.pg = v[1] / base;
    g.qg = v[2] / base;
    g.qmax = v[3] / base;
    g.qmin = v[4] / base;
    g.vg = v[5];
    g.pmax = v[8] / base;
    g.pmin = v[9] / base;
    g.c2 = coef[0] * base;
    g.c1 = coef[1];
    g.c0 = coef[2] / base;
    if (g.c2 < 0) throw Error(ErrorKind::InvalidCase, "negative quadratic cost at gencost line " + std::to_string(crow.line));
    if (!(g.pmax > 0)) throw Error(ErrorKind::InvalidCase, "non-positive Pmax at gen line " + std::to_string(row.line));
    if (!(g.vg > 0)) throw Error(ErrorKind::InvalidCase, "non-positive VG at gen line " + std::to_string(row.line));
    if (!units.contains(bus_id)) gen_bus_order.push_back(bus_id);
    units[bus_id].push_back(g);
  }
  if (gen_bus_order.empty()) throw Error(ErrorKind::InvalidCase, "no in-service generators");

  // Internal numbering.
  std::vector<std::size_t> internal(raw_buses.size());
  std::vector<bool> placed(raw_buses.size(), false);
  for (int id : gen_bus_order) {
    std::size_t r = raw_index[id];
    internal[r] = net.buses.size();
    placed[r] = true;
    net.buses.push_back(raw_buses[r]);
  }
  for (std::size_t r = 0; r < raw_buses.size(); ++r) {
    if (placed[r]) continue;
    internal[r] = net.buses.size();
    net.buses.push_back(raw_buses[r]);
  }

  for (std::size_t gi = 0; gi < gen_bus_order.size(); ++gi) {
    const auto& list = units[gen_bus_order[gi]];
    GenRecord g = list.front();
    if (list.size() > 1) {
      // Equivalent unit: limits and outputs add; the quadratic coefficient is
      // the economic-dispatch equivalent 1/sum(1/c2); linear term from the
      // unit with the smallest c2.
      g = GenRecord{};
      g.vg = list.front().vg;
      double inv_sum = 0.0;
      bool any_free = false;
      const GenRecord* cheapest = &list.front();
      for (const auto& u : list) {
        g.pg += u.pg, g.qg += u.qg, g.qmax += u.qmax, g.qmin += u.qmin;
        g.pmax += u.pmax, g.pmin += u.pmin, g.c0 += u.c0;
        if (u.c2 > 0) inv_sum += 1.0 / u.c2;
        else any_free = true;
        if (u.c2 < cheapest->c2) cheapest = &u;
      }
      g.c2 = any_free ? 0.0 : 1.0 / inv_sum;
      g.c1 = cheapest->c1;
      g.units = static_cast<int>(list.size());
    }
    g.bus = gi;
    net.gens.push_back(g);
  }

  for (const auto& row : data.branch) {
    detail::require_columns(row, 11, "branch");
    const auto& v = row.values;
    if (v[10] <= 0) continue;
    int f = detail::as_int(v[0], row, "branch");
    int t = detail::as_int(v[1], row, "branch");
    if (!raw_index.contains(f) || !raw_index.contains(t)) {
      throw Error(ErrorKind::MalformedRow, "branch row at line " + std::to_string(row.line) + ": unknown bus");
    }
    if (f == t) {
      throw Error(ErrorKind::MalformedRow, "branch row at line " + std::to_string(row.line) + ": self loop");
    }
    BranchRecord br;
    br.from = internal[raw_index[f]];
    br.to = internal[raw_index[t]];
    br.r = v[2];
    br.x = v[3];
    br.b_sh = v[4];
    if (br.x == 0.0) {
      throw Error(ErrorKind::ZeroReactance, "branch row at line " + std::to_string(row.line));
    }
    double ratio = v[8];
    if (ratio < 0) throw Error(ErrorKind::NonPositiveTap, "branch row at line " + std::to_string(row.line));
    br.tap = ratio == 0.0 ? 1.0 : ratio;
    br.shift = v[9] * std::numbers::pi / 180.0;
    br.p_f_max = v[5] > 0 ? v[5] / base : std::numeric_limits<double>::infinity();
    net.branches.push_back(br);
  }
  if (net.branches.empty() && net.buses.size() > 1) throw Error(ErrorKind::InvalidCase, "no in-service branches");

  // Connectivity.
  std::vector<std::vector<std::size_t>> adj(net.buses.size());
  for (const auto& br : net.branches) {
    adj[br.from].push_back(br.to);
    adj[br.to].push_back(br.from);
  }
  std::vector<bool> seen(net.buses.size(), false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  std::size_t reached = 1;
  while (!stack.empty()) {
    auto k = stack.back();
    stack.pop_back();
    for (auto m : adj[k])
      if (!seen[m]) seen[m] = true, ++reached, stack.push_back(m);
  }
  if (reached != net.buses.size()) throw Error(ErrorKind::InvalidCase, "network is not connected");
  return net;
}

inline NetworkCase parse_case(std::string_view text) { return build_case(parse_matpower_text(text)); }

inline NetworkCase parse_case_json(const nlohmann::json& j) { return build_case(matpower_from_json(j)); }

/// Back-conversion to MATPOWER tables in source units and original numbering.
inline MatpowerData to_matpower(const NetworkCase& net) {
  const double base = net.base_mva;
  MatpowerData d;
  d.base_mva = base;
  std::vector<std::size_t> order(net.num_buses());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return net.buses[a].id < net.buses[b].id; });
  for (auto k : order) {
    const auto& b = net.buses[k];
    int type = b.type;
    d.bus.push_back({{double(b.id), double(type), b.pd * base, b.qd * base, b.gs * base, b.bs * base, 1.0, b.vm,
                      b.va * 180.0 / std::numbers::pi, b.base_kv, 1.0, b.vmax, b.vmin}});
  }
  for (const auto& g : net.gens) {
    d.gen.push_back({{double(net.buses[g.bus].id), g.pg * base, g.qg * base, g.qmax * base, g.qmin * base, g.vg,
                      base, 1.0, g.pmax * base, g.pmin * base}});
    d.gencost.push_back({{2.0, 0.0, 0.0, 3.0, g.c2 / base, g.c1, g.c0 * base}});
  }
  for (const auto& br : net.branches) {
    double rate = std::isinf(br.p_f_max) ? 0.0 : br.p_f_max * base;
    d.branch.push_back({{double(net.buses[br.from].id), double(net.buses[br.to].id), br.r, br.x, br.b_sh, rate, rate,
                         rate, br.tap == 1.0 ? 0.0 : br.tap, br.shift * 180.0 / std::numbers::pi, 1.0}});
  }
  return d;
}

// ---------------------------------------------------------------------------
// Operators.

/// E x N signed incidence: +1 at the from-bus, -1 at the to-bus.
inline MatrixXd incidence(const NetworkCase& net) {
  MatrixXd a = MatrixXd::Zero(static_cast<Eigen::Index>(net.num_branches()),
                              static_cast<Eigen::Index>(net.num_buses()));
  for (std::size_t e = 0; e < net.num_branches(); ++e) {
    a(Eigen::Index(e), Eigen::Index(net.branches[e].from)) = 1.0;
    a(Eigen::Index(e), Eigen::Index(net.branches[e].to)) = -1.0;
  }
  return a;
}

/// Two-port pi-model admittances of one branch.
struct BranchAdmittance {
  std::complex<double> yff, yft, ytf, ytt;
};

inline BranchAdmittance branch_admittance(const BranchRecord& br) {
  using C = std::complex<double>;
  const C ys = 1.0 / C(br.r, br.x);
  const C bc(0.0, br.b_sh / 2.0);
  const C tap = std::polar(br.tap, br.shift);
  return {(ys + bc) / (br.tap * br.tap), -ys / std::conj(tap), -ys / tap, ys + bc};
}

struct AdmittanceMatrix {
  MatrixXd G;
  MatrixXd B;
};

inline AdmittanceMatrix admittance(const NetworkCase& net) {
  const auto n = static_cast<Eigen::Index>(net.num_buses());
  AdmittanceMatrix y{MatrixXd::Zero(n, n), MatrixXd::Zero(n, n)};
  auto add = [&](std::size_t i, std::size_t k, std::complex<double> v) {
    y.G(Eigen::Index(i), Eigen::Index(k)) += v.real();
    y.B(Eigen::Index(i), Eigen::Index(k)) += v.imag();
  };
  for (const auto& br : net.branches) {
    if (br.r == 0.0 && br.x == 0.0) throw Error(ErrorKind::ZeroReactance, "singular branch impedance");
    auto ya = branch_admittance(br);
    add(br.from, br.from, ya.yff);
    add(br.from, br.to, ya.yft);
    add(br.to, br.from, ya.ytf);
    add(br.to, br.to, ya.ytt);
  }
  for (std::size_t k = 0; k < net.num_buses(); ++k) add(k, k, {net.buses[k].gs, net.buses[k].bs});
  return y;
}

// ---------------------------------------------------------------------------
// Scenarios.

struct ScalingBounds {
  double lo = 0.9;
  double hi = 1.1;
};

/// Uniform double in [0,1) from the top 53 bits; identical on every platform
/// (std::uniform_real_distribution is implementation-defined).
inline double uniform01(std::mt19937_64& eng) { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }

/// One independent factor per bus, applied to both p_d and q_d.
inline std::vector<DemandScenario> sample_scenarios(const NetworkCase& net, std::size_t count, std::uint64_t seed,
                                                    ScalingBounds bounds = {}) {
  std::mt19937_64 eng(seed);
  const DemandScenario nominal = net.nominal_demand();
  std::vector<DemandScenario> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    DemandScenario d = nominal;
    for (Eigen::Index k = 0; k < d.p_d.size(); ++k) {
      double factor = bounds.lo + (bounds.hi - bounds.lo) * uniform01(eng);
      d.p_d[k] *= factor;
      d.q_d[k] *= factor;
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace optlin

#endif  // OPTLIN_GRID_MODEL_HPP
