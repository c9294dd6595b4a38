#ifndef OPTLIN_LOSS_HPP
#define OPTLIN_LOSS_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "optlin/acpf_dslack.hpp"
#include "optlin/grid_model.hpp"

namespace optlin {

/// Steady-state cost and limit violations of one operating point.
///
/// `cost` and `loss` are in normalized units ($/h divided by baseMVA, with
/// power in p.u.); the violation vectors are in MW.
struct LossReport {
  double cost = 0;
  VectorXd gen_violations;   // max(0, p_g_bar - p_g_max), MW
  VectorXd flow_violations;  // max(0, |p_f_bar| - p_f_max), MW
  double loss = 0;
  double w = 0;
  double full_cost_usd = 0;  // c2 p^2 + c1 p + c0 in $/h, reporting only

  double cost_usd(double base_mva) const { return cost * base_mva; }
  double total_violation_mw() const { return gen_violations.sum() + flow_violations.sum(); }
};

/// cost(p) = p' C p, with C = diag(c2) in normalized units.
inline double generation_cost(const NetworkCase& net, const VectorXd& pg) {
  return pg.dot(net.cost().cwiseProduct(pg));
}

inline LossReport loss_of(const PfSteadyState& st, const NetworkCase& net, double w) {
  const double base = net.base_mva;
  LossReport rep;
  rep.w = w;
  rep.cost = generation_cost(net, st.p_g_bar);
  rep.gen_violations = (st.p_g_bar - net.pg_max()).cwiseMax(0.0) * base;
  const VectorXd pfmax = net.pf_max();
  rep.flow_violations = VectorXd::Zero(pfmax.size());
  for (Eigen::Index e = 0; e < pfmax.size(); ++e)
    if (std::isfinite(pfmax[e])) rep.flow_violations[e] = std::max(0.0, std::abs(st.p_f_bar[e]) - pfmax[e]) * base;
  rep.loss = rep.cost + w * rep.total_violation_mw() / base;
  for (std::size_t i = 0; i < net.num_gens(); ++i) {
    const auto& g = net.gens[i];
    const double p = st.p_g_bar[Eigen::Index(i)];
    rep.full_cost_usd += (g.c2 * p * p + g.c1 * p + g.c0) * base;
  }
  return rep;
}

}  // namespace optlin

#endif  // OPTLIN_LOSS_HPP
