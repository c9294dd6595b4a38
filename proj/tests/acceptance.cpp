// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Optional arguments select criteria by number.

#include <chrono>
#include <complex>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>

#include "optlin/optlin.hpp"

using namespace optlin;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string data_path(const std::string& name) { return std::string(OPTLIN_DATA_DIR) + "/" + name; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Training setup shared by criteria 6 and 7.
constexpr std::uint64_t kTrainScenarioSeed = 2025;
constexpr std::uint64_t kBatchSeed = 1;
constexpr int kIterations = 200;
constexpr double kAlpha0 = 1e-3;

struct Case39Study {
  NetworkCase net = load_case(data_path("case39.m"));
  std::vector<DemandScenario> train_set = sample_scenarios(net, 64, kTrainScenarioSeed);
  std::vector<DemandScenario> test;
  std::vector<std::optional<VectorXd>> refs;
  std::map<double, EvalSummary> trained;
  std::optional<EvalSummary> classical;

  Case39Study() {
    test = scenarios_from_json(net, read_json(data_path("case39_test1000.json")));
    refs = references_from_json(net, read_json(data_path("case39_test1000_acopf.json")));
  }

  EvalSummary summary_for(const LinCoeffs& psi) { return *evaluate(net, psi, test, refs).summary; }

  const EvalSummary& classical_summary() {
    if (!classical) classical = summary_for(init_classical(net));
    return *classical;
  }

  const EvalSummary& trained_summary(double w) {
    auto it = trained.find(w);
    if (it != trained.end()) return it->second;
    TrainConfig cfg;
    cfg.scenario_count = 64;
    cfg.batch_size = 8;
    cfg.iterations = kIterations;
    cfg.alpha0 = kAlpha0;
    cfg.w = w;
    cfg.seed = kBatchSeed;
    const TrainResult r = optlin::train(net, train_set, cfg);
    return trained.emplace(w, summary_for(r.psi)).first->second;
  }
};

Case39Study& study() {
  static Case39Study s;
  return s;
}

// ---------------------------------------------------------------------------

Outcome classical_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  const NetworkCase net = load_case(data_path("case39.m"));
  const QpCanonical qp = assemble(net, init_classical(net), net.nominal_demand(), 0.0);
  const QpSolution sol = solve(qp);
  const double elapsed = seconds_since(t0);
  const VectorXd oracle = dispatch_from_json(net, read_json(data_path("case39_dcopf_oracle.json"))).pg;
  const double err = (sol.pg(qp.map) - oracle).cwiseAbs().maxCoeff();
  return {err <= 1e-6 && elapsed < 5.0, fmt("max |pg - oracle| = %.3g p.u., %.3f s", err, elapsed)};
}

Outcome acpf_correctness() {
  const NetworkCase net = load_case(data_path("case39.m"));
  const DemandScenario d = net.nominal_demand();
  const QpCanonical qp = assemble(net, init_classical(net), d);
  const VectorXd pg = solve(qp).pg(qp.map);
  const PfSetpoint sp = make_setpoint(net, pg, d);
  const PfSteadyState st = solve_pf(sp, net);
  const double resid = pf_residuals(pf_unknowns(st, net), sp, net).cwiseAbs().maxCoeff();

  // branch losses from complex terminal currents
  using C = std::complex<double>;
  double branch_loss = 0;
  for (const auto& br : net.branches) {
    const C vf = std::polar(st.v[Eigen::Index(br.from)], st.theta[Eigen::Index(br.from)]);
    const C vt = std::polar(st.v[Eigen::Index(br.to)], st.theta[Eigen::Index(br.to)]);
    const C ys = 1.0 / C(br.r, br.x), bc(0, br.b_sh / 2), tap = std::polar(br.tap, br.shift);
    const C i_f = (ys + bc) / std::norm(tap) * vf - ys / std::conj(tap) * vt;
    const C i_t = -ys / tap * vf + (ys + bc) * vt;
    branch_loss += (vf * std::conj(i_f) + vt * std::conj(i_t)).real();
  }
  const double balance_gap = std::abs(st.p_g_bar.sum() - d.p_d.sum() - branch_loss);
  const double alpha_gap = (st.p_g_bar - pg - net.participation() * st.zeta).cwiseAbs().maxCoeff();
  const bool ok = st.iterations <= 10 && resid <= 1e-10 && balance_gap <= 1e-8 && alpha_gap <= 1e-14;
  return {ok, fmt("%d iterations, residual %.2g, |sum pg - sum pd - losses| = %.2g, |pg_bar - pg - alpha zeta| = %.2g",
                  st.iterations, resid, balance_gap, alpha_gap)};
}

Outcome qp_sensitivity_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const NetworkCase net = load_case(data_path("case3.m"));
  const QpCanonical qp = assemble(net, init_classical(net), net.nominal_demand());
  const QpSolution sol = solve(qp);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<Eigen::Index> row(0, qp.m_eq() - 1), col(0, qp.n() - 1);
  const VectorXd zeq = VectorXd::Zero(qp.m_eq()), zin = VectorXd::Zero(qp.m_in());
  double worst = 0;
  int checks = 0, changed = 0;
  auto record = [&](const DirectionCheck& c) {
    worst = std::max(worst, c.rel_error);
    changed += c.active_set_changed;
    ++checks;
  };
  for (int k = 0; k < 20; ++k) {
    MatrixXd dW = MatrixXd::Zero(qp.m_eq(), qp.n());
    dW(row(rng), col(rng)) = 1.0;
    record(check_direction(qp, sol, dW, zeq, zin));
  }
  for (Eigen::Index i = 0; i < qp.m_eq(); ++i) {
    VectorXd du = zeq;
    du[i] = 1.0;
    record(check_direction(qp, sol, MatrixXd::Zero(qp.m_eq(), qp.n()), du, zin));
  }
  for (Eigen::Index i = 0; i < qp.m_in(); ++i) {
    VectorXd du = zin;
    du[i] = 1.0;
    record(check_direction(qp, sol, MatrixXd::Zero(qp.m_eq(), qp.n()), zeq, du));
  }
  const double elapsed = seconds_since(t0);
  return {worst <= 1e-4 && elapsed < 30.0,
          fmt("%d directions, max relative error %.3g, %d active-set changes, %.3f s", checks, worst, changed, elapsed)};
}

Outcome adjoint_equivalence() {
  const NetworkCase net = load_case(data_path("case3.m"));
  const DemandScenario d = net.nominal_demand();
  const ForwardResult fr = forward(net, init_classical(net), d, 10.0);
  const LossGradients lg = loss_subgradient(fr.state, net, 10.0);
  const VectorXd dpg = chain_to_dispatch(lg, pf_sensitivities(fr.state, fr.setpoint, net), fr.state, net);
  VectorXd g = VectorXd::Zero(fr.qp.n());
  g.segment(fr.qp.map.pg_offset(), fr.qp.map.ng) = dpg;
  const double gap_loss = adjoint_direct_gap(fr.qp, fr.sol, g);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  VectorXd r(fr.qp.n());
  for (auto& x : r) x = nd(rng);
  const double gap_random = adjoint_direct_gap(fr.qp, fr.sol, r);
  const double gap = std::max(gap_loss, gap_random);
  return {gap <= 1e-10, fmt("max entrywise gap %.3g (loss gradient %.3g, random gradient %.3g)", gap, gap_loss,
                            gap_random)};
}

Outcome end_to_end_gradient() {
  const NetworkCase net = load_case(data_path("case3.m"));
  PipelineOptions opt;
  opt.pf.tolerance = 1e-13;
  const PsiGradCheck chk = check_psi_gradient(net, init_classical(net), net.nominal_demand(), 10.0, 1e-6, opt);
  const double excl = chk.excluded_fraction();
  return {chk.median_rel_error <= 1e-4 && excl < 0.05,
          fmt("%zu coordinates, median relative error %.3g, %zu excluded (%.1f%%)", chk.coords.size(),
              chk.median_rel_error, chk.num_excluded, 100 * excl)};
}

Outcome training_efficacy() {
  auto& s = study();
  const EvalSummary& cl = s.classical_summary();
  const EvalSummary& tr = s.trained_summary(10.0);
  const double dcost = tr.mean_cost_increase_pct - cl.mean_cost_increase_pct;
  const bool ok = tr.failures == 0 && cl.failures == 0 && cl.with_reference == s.test.size() &&
                  tr.mean_total_violation_mw < cl.mean_total_violation_mw && std::abs(dcost) <= 1.0;
  return {ok, fmt("violation %.4g -> %.4g MW, cost increase %.4f%% -> %.4f%% (change %+.4f pp), %zu/%zu references",
                  cl.mean_total_violation_mw, tr.mean_total_violation_mw, cl.mean_cost_increase_pct,
                  tr.mean_cost_increase_pct, dcost, cl.with_reference, s.test.size())};
}

Outcome weight_monotonicity() {
  auto& s = study();
  const std::vector<double> ws{1, 10, 50, 100};
  std::vector<double> v;
  std::string trail;
  for (double w : ws) {
    v.push_back(s.trained_summary(w).mean_avg_gen_viol_mw);
    trail += fmt("%sw=%g: %.4g", trail.empty() ? "" : ", ", w, v.back());
  }
  bool ok = v[2] <= 0.5 && v[3] <= 0.5;
  for (std::size_t i = 1; i < v.size(); ++i) ok = ok && v[i] <= v[i - 1];
  return {ok, "mean gen violation MW " + trail};
}

Outcome cost_increase_unit() {
  const NetworkCase net = load_case(data_path("case39.m"));
  const auto refs = references_from_json(net, read_json(data_path("case39_test1000_acopf.json")));
  const auto test = scenarios_from_json(net, read_json(data_path("case39_test1000.json")));
  const VectorXd pbar = forward(net, init_classical(net), test[0], 0).state.p_g_bar;
  const double same = cost_increase_pct(net, pbar, pbar);
  NetworkCase doubled = net;
  for (auto& g : doubled.gens) g.c2 *= 2.0;
  const VectorXd& ref = *refs[0];
  const double a = cost_increase_pct(net, pbar, ref), b = cost_increase_pct(doubled, pbar, ref);
  const bool ok = same == 0.0 && std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a));
  return {ok, fmt("self-reference %.3g%%, scenario 0: %.12f%% vs doubled C %.12f%%", same, a, b)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"classical-equivalence", classical_equivalence},
      {"acpf-correctness", acpf_correctness},
      {"qp-sensitivity-oracle", qp_sensitivity_oracle},
      {"adjoint-equivalence", adjoint_equivalence},
      {"end-to-end-gradient", end_to_end_gradient},
      {"training-efficacy", training_efficacy},
      {"weight-monotonicity", weight_monotonicity},
      {"cost-increase-unit", cost_increase_unit},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = int(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << id << ' ' << criteria[k].first << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
