#ifndef OPTLIN_ACPF_DSLACK_HPP
#define OPTLIN_ACPF_DSLACK_HPP

// AC power flow with a distributed slack. Generators follow their DC
// setpoints plus a participation-weighted share of a scalar mismatch zeta;
// generator voltage magnitudes are pinned to their references.
//
// Unknowns x = [zeta; v_d (load buses); theta_2..theta_N]  (2N - Ng entries)
// Equations f = [P(v,theta) - (F_g p_g_bar - p_d)        (all N buses);
//                Q(v,theta) + q_d                        (load buses)]
// with p_g_bar = p_g_dc + alpha * zeta.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "optlin/errors.hpp"
#include "optlin/grid_model.hpp"

namespace optlin {

struct PfSetpoint {
  VectorXd p_g_dc;
  VectorXd v_g_ref;
  DemandScenario demand;
};

inline PfSetpoint make_setpoint(const NetworkCase& net, const VectorXd& p_g_dc, const DemandScenario& demand) {
  return {p_g_dc, net.v_g_ref(), demand};
}

struct PfOptions {
  double tolerance = 1e-10;
  int max_iterations = 50;
};

struct PfSteadyState {
  double zeta = 0;
  VectorXd v;
  VectorXd theta;
  VectorXd p_g_bar;
  VectorXd p_f_bar;
  VectorXd q_g_bar;  // reported only
  bool converged = false;
  int iterations = 0;
  std::vector<double> residual_history;  // |f|_inf before each Newton step and at exit
};

/// Index layout of the unknown vector.
struct PfLayout {
  Eigen::Index ng, nb;
  explicit PfLayout(const NetworkCase& net) : ng(Eigen::Index(net.num_gens())), nb(Eigen::Index(net.num_buses())) {}
  Eigen::Index size() const { return 2 * nb - ng; }
  Eigen::Index num_vd() const { return nb - ng; }
  Eigen::Index vd_offset() const { return 1; }
  Eigen::Index theta_offset() const { return 1 + nb - ng; }
};

namespace detail {

inline void unpack(const PfLayout& lay, const VectorXd& x, const VectorXd& v_g_ref, VectorXd& v, VectorXd& theta) {
  v.resize(lay.nb);
  theta.resize(lay.nb);
  v.head(lay.ng) = v_g_ref;
  v.tail(lay.num_vd()) = x.segment(lay.vd_offset(), lay.num_vd());
  theta[0] = 0.0;
  theta.tail(lay.nb - 1) = x.segment(lay.theta_offset(), lay.nb - 1);
}

/// Bus injections P_n, Q_n from the polar power flow equations.
inline void injections(const AdmittanceMatrix& y, const VectorXd& v, const VectorXd& theta, VectorXd& p,
                       VectorXd& q) {
  const Eigen::Index nb = v.size();
  p = VectorXd::Zero(nb);
  q = VectorXd::Zero(nb);
  for (Eigen::Index n = 0; n < nb; ++n) {
    double sp = 0, sq = 0;
    for (Eigen::Index k = 0; k < nb; ++k) {
      const double g = y.G(n, k), b = y.B(n, k);
      if (g == 0.0 && b == 0.0) continue;
      const double t = theta[n] - theta[k];
      const double c = std::cos(t), s = std::sin(t);
      sp += v[k] * (g * c + b * s);
      sq += v[k] * (g * s - b * c);
    }
    p[n] = v[n] * sp;
    q[n] = v[n] * sq;
  }
}

}  // namespace detail

/// Residual vector of the distributed-slack equations at unknowns `x`.
inline VectorXd pf_residuals(const VectorXd& x, const PfSetpoint& sp, const NetworkCase& net,
                             const AdmittanceMatrix& y) {
  const PfLayout lay(net);
  VectorXd v, theta, p, q;
  detail::unpack(lay, x, sp.v_g_ref, v, theta);
  detail::injections(y, v, theta, p, q);
  const VectorXd alpha = net.participation();
  VectorXd f(lay.size());
  for (Eigen::Index n = 0; n < lay.nb; ++n) {
    double gen = n < lay.ng ? sp.p_g_dc[n] + alpha[n] * x[0] : 0.0;
    f[n] = p[n] - gen + sp.demand.p_d[n];
  }
  for (Eigen::Index k = 0; k < lay.num_vd(); ++k) {
    const Eigen::Index n = lay.ng + k;
    f[lay.nb + k] = q[n] + sp.demand.q_d[n];
  }
  return f;
}

inline VectorXd pf_residuals(const VectorXd& x, const PfSetpoint& sp, const NetworkCase& net) {
  return pf_residuals(x, sp, net, admittance(net));
}

/// Analytic Jacobian of pf_residuals with respect to x.
inline MatrixXd pf_jacobian(const VectorXd& x, const PfSetpoint& sp, const NetworkCase& net,
                            const AdmittanceMatrix& y) {
  const PfLayout lay(net);
  VectorXd v, theta, p, q;
  detail::unpack(lay, x, sp.v_g_ref, v, theta);
  detail::injections(y, v, theta, p, q);
  const VectorXd alpha = net.participation();
  const Eigen::Index nb = lay.nb, ng = lay.ng;

  // Full-bus partials dP/dv, dP/dtheta, dQ/dv, dQ/dtheta.
  MatrixXd dp_dv = MatrixXd::Zero(nb, nb), dp_dt = MatrixXd::Zero(nb, nb);
  MatrixXd dq_dv = MatrixXd::Zero(nb, nb), dq_dt = MatrixXd::Zero(nb, nb);
  for (Eigen::Index n = 0; n < nb; ++n) {
    for (Eigen::Index k = 0; k < nb; ++k) {
      if (k == n) continue;
      const double g = y.G(n, k), b = y.B(n, k);
      if (g == 0.0 && b == 0.0) continue;
      const double t = theta[n] - theta[k];
      const double c = std::cos(t), s = std::sin(t);
      dp_dt(n, k) = v[n] * v[k] * (g * s - b * c);
      dq_dt(n, k) = -v[n] * v[k] * (g * c + b * s);
      dp_dv(n, k) = v[n] * (g * c + b * s);
      dq_dv(n, k) = v[n] * (g * s - b * c);
    }
    const double gnn = y.G(n, n), bnn = y.B(n, n);
    dp_dt(n, n) = -q[n] - bnn * v[n] * v[n];
    dq_dt(n, n) = p[n] - gnn * v[n] * v[n];
    dp_dv(n, n) = p[n] / v[n] + gnn * v[n];
    dq_dv(n, n) = q[n] / v[n] - bnn * v[n];
  }

  MatrixXd j = MatrixXd::Zero(lay.size(), lay.size());
  for (Eigen::Index n = 0; n < ng; ++n) j(n, 0) = -alpha[n];
  j.block(0, lay.vd_offset(), nb, lay.num_vd()) = dp_dv.rightCols(lay.num_vd());
  j.block(0, lay.theta_offset(), nb, nb - 1) = dp_dt.rightCols(nb - 1);
  j.block(nb, lay.vd_offset(), lay.num_vd(), lay.num_vd()) = dq_dv.bottomRightCorner(lay.num_vd(), lay.num_vd());
  j.block(nb, lay.theta_offset(), lay.num_vd(), nb - 1) = dq_dt.bottomRightCorner(lay.num_vd(), nb - 1);
  return j;
}

/// Unknown vector of a solved state.
inline VectorXd pf_unknowns(const PfSteadyState& st, const NetworkCase& net) {
  const PfLayout lay(net);
  VectorXd x(lay.size());
  x[0] = st.zeta;
  x.segment(lay.vd_offset(), lay.num_vd()) = st.v.tail(lay.num_vd());
  x.segment(lay.theta_offset(), lay.nb - 1) = st.theta.tail(lay.nb - 1);
  return x;
}

struct BranchFlows {
  VectorXd p_from;  // sending-end active power
  VectorXd p_to;    // receiving-end active power
};

inline BranchFlows branch_flows(const VectorXd& v, const VectorXd& theta, const NetworkCase& net) {
  const auto ne = Eigen::Index(net.num_branches());
  BranchFlows fl{VectorXd(ne), VectorXd(ne)};
  for (Eigen::Index e = 0; e < ne; ++e) {
    const auto& br = net.branches[std::size_t(e)];
    const auto ya = branch_admittance(br);
    const auto f = Eigen::Index(br.from), t = Eigen::Index(br.to);
    const double d = theta[f] - theta[t];
    fl.p_from[e] = v[f] * v[f] * ya.yff.real() + v[f] * v[t] * (ya.yft.real() * std::cos(d) + ya.yft.imag() * std::sin(d));
    fl.p_to[e] = v[t] * v[t] * ya.ytt.real() + v[t] * v[f] * (ya.ytf.real() * std::cos(-d) + ya.ytf.imag() * std::sin(-d));
  }
  return fl;
}

/// Sending-end active flows of a solved state.
inline VectorXd line_flows(const PfSteadyState& st, const NetworkCase& net) {
  return branch_flows(st.v, st.theta, net).p_from;
}

/// Partials of sending-end flows with respect to all bus magnitudes and angles.
struct FlowJacobian {
  MatrixXd d_v;      // E x N
  MatrixXd d_theta;  // E x N
};

inline FlowJacobian flow_jacobian(const VectorXd& v, const VectorXd& theta, const NetworkCase& net) {
  const auto ne = Eigen::Index(net.num_branches());
  const auto nb = Eigen::Index(net.num_buses());
  FlowJacobian fj{MatrixXd::Zero(ne, nb), MatrixXd::Zero(ne, nb)};
  for (Eigen::Index e = 0; e < ne; ++e) {
    const auto& br = net.branches[std::size_t(e)];
    const auto ya = branch_admittance(br);
    const auto f = Eigen::Index(br.from), t = Eigen::Index(br.to);
    const double d = theta[f] - theta[t];
    const double g = ya.yft.real(), b = ya.yft.imag();
    const double c = std::cos(d), s = std::sin(d);
    fj.d_v(e, f) = 2.0 * v[f] * ya.yff.real() + v[t] * (g * c + b * s);
    fj.d_v(e, t) = v[f] * (g * c + b * s);
    fj.d_theta(e, f) = v[f] * v[t] * (-g * s + b * c);
    fj.d_theta(e, t) = -fj.d_theta(e, f);
  }
  return fj;
}

/// Active power consumed by the network: series losses plus shunt conductance.
inline double network_loss(const VectorXd& v, const VectorXd& theta, const NetworkCase& net) {
  const auto fl = branch_flows(v, theta, net);
  double loss = (fl.p_from + fl.p_to).sum();
  for (std::size_t k = 0; k < net.num_buses(); ++k) loss += net.buses[k].gs * v[Eigen::Index(k)] * v[Eigen::Index(k)];
  return loss;
}

/// Newton-Raphson from a flat start (v_d = 1, theta = 0, zeta = 0).
inline PfSteadyState solve_pf(const PfSetpoint& sp, const NetworkCase& net, const PfOptions& opt = {}) {
  const PfLayout lay(net);
  if (sp.p_g_dc.size() != lay.ng || sp.v_g_ref.size() != lay.ng || sp.demand.p_d.size() != lay.nb ||
      sp.demand.q_d.size() != lay.nb) {
    throw Error(ErrorKind::ShapeMismatch, "power flow setpoint does not match the case");
  }
  if (!sp.p_g_dc.allFinite() || !sp.demand.p_d.allFinite() || !sp.demand.q_d.allFinite() ||
      (sp.v_g_ref.array() <= 0).any()) {
    throw Error(ErrorKind::ShapeMismatch, "power flow setpoint must be finite with positive voltage references");
  }
  const AdmittanceMatrix y = admittance(net);
  VectorXd x = VectorXd::Zero(lay.size());
  x.segment(lay.vd_offset(), lay.num_vd()).setOnes();

  PfSteadyState st;
  VectorXd f = pf_residuals(x, sp, net, y);
  double norm = f.cwiseAbs().maxCoeff();
  st.residual_history.push_back(norm);
  int it = 0;
  while (!(norm <= opt.tolerance)) {
    if (it >= opt.max_iterations || !std::isfinite(norm)) {
      throw Error(ErrorKind::NonConvergence, "Newton power flow stopped after " + std::to_string(it) +
                                                 " iterations with mismatch " + std::to_string(norm));
    }
    MatrixXd j = pf_jacobian(x, sp, net, y);
    Eigen::PartialPivLU<MatrixXd> lu(j);
    if (!(lu.rcond() > 1e-14)) throw Error(ErrorKind::SingularJacobian, "power flow Jacobian is singular");
    x -= lu.solve(f);
    ++it;
    f = pf_residuals(x, sp, net, y);
    norm = f.cwiseAbs().maxCoeff();
    st.residual_history.push_back(norm);
  }

  st.converged = true;
  st.iterations = it;
  st.zeta = x[0];
  detail::unpack(lay, x, sp.v_g_ref, st.v, st.theta);
  st.p_g_bar = sp.p_g_dc + net.participation() * st.zeta;
  st.p_f_bar = branch_flows(st.v, st.theta, net).p_from;
  VectorXd p, q;
  detail::injections(y, st.v, st.theta, p, q);
  st.q_g_bar = q.head(lay.ng) + sp.demand.q_d.head(lay.ng);
  return st;
}

}  // namespace optlin

#endif  // OPTLIN_ACPF_DSLACK_HPP
