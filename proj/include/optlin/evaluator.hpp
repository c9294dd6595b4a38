#ifndef OPTLIN_EVALUATOR_HPP
#define OPTLIN_EVALUATOR_HPP

// Per-scenario cost and violation metrics of the steady state reached by a
// given set of linearization coefficients.

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "optlin/errors.hpp"
#include "optlin/grid_model.hpp"
#include "optlin/lin_coeffs.hpp"
#include "optlin/loss.hpp"
#include "optlin/parallel.hpp"
#include "optlin/sensitivity.hpp"

namespace optlin {

/// Signed percentage increase of steady-state cost over a reference
/// dispatch: (p'Cp - r'Cr) / (r'Cr) * 100.
inline double cost_increase_pct(const NetworkCase& net, const VectorXd& pg_bar, const VectorXd& pg_ref) {
  const double ref = generation_cost(net, pg_ref);
  return (generation_cost(net, pg_bar) - ref) / ref * 100.0;
}

/// Cost-weighted dispatch deviation: (p-r)'C(p-r) / (r'Cr) * 100. Never negative.
inline double dispatch_deviation_pct(const NetworkCase& net, const VectorXd& pg_bar, const VectorXd& pg_ref) {
  return generation_cost(net, pg_bar - pg_ref) / generation_cost(net, pg_ref) * 100.0;
}

struct EvalRecord {
  std::size_t scenario_id = 0;
  bool ok = false;
  std::string error;
  double cost_usd = 0;  // p_bar' C p_bar in $/h
  std::optional<double> cost_increase_pct;
  int n_gen_viol = 0;
  double avg_gen_viol_mw = 0;  // violation sum / violated count, 0 when none
  int n_flow_viol = 0;
  double avg_flow_viol_mw = 0;
  double total_violation_mw = 0;
  VectorXd pg_bar;  // p.u.
};

struct EvalSummary {
  std::size_t count = 0;
  std::size_t failures = 0;
  std::size_t with_reference = 0;
  double mean_cost_increase_pct = std::numeric_limits<double>::quiet_NaN();
  double mean_avg_gen_viol_mw = 0;
  double mean_avg_flow_viol_mw = 0;
  double mean_total_violation_mw = 0;
  double mean_cost_usd = 0;
};

struct EvalResult {
  std::vector<EvalRecord> records;
  std::optional<EvalSummary> summary;  // empty when there are no scenarios
};

inline EvalRecord make_record(std::size_t id, const PfSteadyState& st, const NetworkCase& net,
                              const VectorXd* reference) {
  const LossReport rep = loss_of(st, net, 0.0);
  EvalRecord r;
  r.scenario_id = id;
  r.ok = true;
  r.cost_usd = rep.cost_usd(net.base_mva);
  r.pg_bar = st.p_g_bar;
  const double tol_mw = kViolationTol * net.base_mva;
  for (Eigen::Index i = 0; i < rep.gen_violations.size(); ++i)
    if (rep.gen_violations[i] > tol_mw) ++r.n_gen_viol, r.avg_gen_viol_mw += rep.gen_violations[i];
  for (Eigen::Index e = 0; e < rep.flow_violations.size(); ++e)
    if (rep.flow_violations[e] > tol_mw) ++r.n_flow_viol, r.avg_flow_viol_mw += rep.flow_violations[e];
  r.total_violation_mw = r.avg_gen_viol_mw + r.avg_flow_viol_mw;
  if (r.n_gen_viol) r.avg_gen_viol_mw /= r.n_gen_viol;
  if (r.n_flow_viol) r.avg_flow_viol_mw /= r.n_flow_viol;
  if (reference) r.cost_increase_pct = cost_increase_pct(net, st.p_g_bar, *reference);
  return r;
}

/// Runs the full pipeline on every scenario. Per-scenario failures are
/// recorded and excluded from the summary. `references` holds optional
/// reference dispatches (p.u.), aligned with `scenarios` when non-empty.
inline EvalResult evaluate(const NetworkCase& net, const LinCoeffs& psi, const std::vector<DemandScenario>& scenarios,
                           const std::vector<std::optional<VectorXd>>& references = {}, unsigned jobs = 0,
                           const PipelineOptions& opt = {}) {
  if (!references.empty() && references.size() != scenarios.size()) {
    throw Error(ErrorKind::ShapeMismatch, "reference dispatches do not match scenario count");
  }
  EvalResult res;
  res.records.resize(scenarios.size());
  parallel_for(scenarios.size(), jobs, [&](std::size_t s) {
    try {
      const ForwardResult fr = forward(net, psi, scenarios[s], 0.0, opt);
      const VectorXd* ref = (!references.empty() && references[s]) ? &*references[s] : nullptr;
      res.records[s] = make_record(s, fr.state, net, ref);
    } catch (const Error& e) {
      res.records[s].scenario_id = s;
      res.records[s].ok = false;
      res.records[s].error = e.what();
    }
  });
  if (scenarios.empty()) return res;

  EvalSummary sum;
  double inc = 0;
  for (const auto& r : res.records) {
    ++sum.count;
    if (!r.ok) {
      ++sum.failures;
      continue;
    }
    sum.mean_avg_gen_viol_mw += r.avg_gen_viol_mw;
    sum.mean_avg_flow_viol_mw += r.avg_flow_viol_mw;
    sum.mean_total_violation_mw += r.total_violation_mw;
    sum.mean_cost_usd += r.cost_usd;
    if (r.cost_increase_pct) ++sum.with_reference, inc += *r.cost_increase_pct;
  }
  const std::size_t ok = sum.count - sum.failures;
  if (ok > 0) {
    sum.mean_avg_gen_viol_mw /= double(ok);
    sum.mean_avg_flow_viol_mw /= double(ok);
    sum.mean_total_violation_mw /= double(ok);
    sum.mean_cost_usd /= double(ok);
  }
  if (sum.with_reference > 0) sum.mean_cost_increase_pct = inc / double(sum.with_reference);
  res.summary = sum;
  return res;
}

/// CSV columns: scenario_id, cost, cost_increase_pct, n_gen_viol,
/// avg_gen_viol_mw, n_flow_viol, avg_flow_viol_mw. Empty cells for
/// unavailable values; failed scenarios keep only their id.
inline void write_eval_csv(std::ostream& out, const EvalResult& res) {
  out << "scenario_id,cost,cost_increase_pct,n_gen_viol,avg_gen_viol_mw,n_flow_viol,avg_flow_viol_mw\n";
  out.precision(12);
  for (const auto& r : res.records) {
    out << r.scenario_id << ',';
    if (!r.ok) {
      out << ",,,,,\n";
      continue;
    }
    out << r.cost_usd << ',';
    if (r.cost_increase_pct) out << *r.cost_increase_pct;
    out << ',' << r.n_gen_viol << ',' << r.avg_gen_viol_mw << ',' << r.n_flow_viol << ',' << r.avg_flow_viol_mw << '\n';
  }
}

}  // namespace optlin

#endif  // OPTLIN_EVALUATOR_HPP
