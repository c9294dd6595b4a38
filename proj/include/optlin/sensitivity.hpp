#ifndef OPTLIN_SENSITIVITY_HPP
#define OPTLIN_SENSITIVITY_HPP

// Reverse-mode gradient of the steady-state loss with respect to the
// linearization coefficients:
//
//   loss subgradient  ->  AC power flow implicit differentiation
//                     ->  DC OPF KKT implicit differentiation (adjoint form)

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "optlin/acpf_dslack.hpp"
#include "optlin/dcopf_qp.hpp"
#include "optlin/errors.hpp"
#include "optlin/grid_model.hpp"
#include "optlin/lin_coeffs.hpp"
#include "optlin/loss.hpp"

namespace optlin {

/// Indicators fire only when a limit is exceeded by more than this (p.u.).
inline constexpr double kViolationTol = 1e-9;
/// Active constraints whose multiplier is below this are treated as inactive.
inline constexpr double kWeakMultiplierTol = 1e-7;
/// Largest acceptable condition estimate of the KKT matrix.
inline constexpr double kMaxGammaCondition = 1e12;
/// Normwise backward-error bound enforced on every linear solve.
inline constexpr double kSolveResidualTol = 1e-9;

// ---------------------------------------------------------------------------
// Loss subgradients.

struct LossGradients {
  VectorXd d_pg_bar;  // Ng
  VectorXd d_pf_bar;  // E
};

inline LossGradients loss_subgradient(const PfSteadyState& st, const NetworkCase& net, double w) {
  const VectorXd c = net.cost();
  const VectorXd pgmax = net.pg_max();
  const VectorXd pfmax = net.pf_max();
  LossGradients lg;
  lg.d_pg_bar = 2.0 * c.cwiseProduct(st.p_g_bar);
  for (Eigen::Index i = 0; i < pgmax.size(); ++i)
    if (st.p_g_bar[i] - pgmax[i] > kViolationTol) lg.d_pg_bar[i] += w;
  lg.d_pf_bar = VectorXd::Zero(pfmax.size());
  for (Eigen::Index e = 0; e < pfmax.size(); ++e) {
    if (!std::isfinite(pfmax[e])) continue;
    if (st.p_f_bar[e] - pfmax[e] > kViolationTol) lg.d_pf_bar[e] = w;
    else if (-st.p_f_bar[e] - pfmax[e] > kViolationTol) lg.d_pf_bar[e] = -w;
  }
  return lg;
}

// ---------------------------------------------------------------------------
// Power flow sensitivities.

struct PfSensitivities {
  VectorXd d_zeta;  // Ng
  MatrixXd d_vd;    // (N - Ng) x Ng
  MatrixXd d_theta; // (N - 1) x Ng
  double residual = 0;  // |J X - [F_g; 0]|_inf
};

namespace detail {

inline double backward_error(const MatrixXd& a, const MatrixXd& x, const MatrixXd& b) {
  const double r = (a * x - b).cwiseAbs().maxCoeff();
  const double denom = a.cwiseAbs().rowwise().sum().maxCoeff() * x.cwiseAbs().maxCoeff() + b.cwiseAbs().maxCoeff();
  return denom > 0 ? r / denom : r;
}

}  // namespace detail

/// Solves J X = [F_g; 0] with one factorization of the Jacobian at the solved state.
inline PfSensitivities pf_sensitivities(const PfSteadyState& st, const PfSetpoint& sp, const NetworkCase& net) {
  const PfLayout lay(net);
  const MatrixXd j = pf_jacobian(pf_unknowns(st, net), sp, net, admittance(net));
  Eigen::PartialPivLU<MatrixXd> lu(j);
  if (!(lu.rcond() > 1e-14)) throw Error(ErrorKind::SingularJacobian, "power flow Jacobian is singular");
  MatrixXd rhs = MatrixXd::Zero(lay.size(), lay.ng);
  rhs.topRows(lay.ng).setIdentity();
  const MatrixXd x = lu.solve(rhs);
  PfSensitivities ps;
  ps.residual = (j * x - rhs).cwiseAbs().maxCoeff();
  if (!x.allFinite() || detail::backward_error(j, x, rhs) > kSolveResidualTol) {
    throw Error(ErrorKind::SingularJacobian, "inaccurate power flow sensitivity solve");
  }
  ps.d_zeta = x.row(0).transpose();
  ps.d_vd = x.middleRows(lay.vd_offset(), lay.num_vd());
  ps.d_theta = x.middleRows(lay.theta_offset(), lay.nb - 1);
  return ps;
}

/// Total derivative of the loss with respect to the DC dispatch.
inline VectorXd chain_to_dispatch(const LossGradients& lg, const PfSensitivities& ps, const PfSteadyState& st,
                                  const NetworkCase& net) {
  const PfLayout lay(net);
  const VectorXd alpha = net.participation();
  // d p_g_bar / d p_g_dc = I + alpha * d_zeta'
  VectorXd g = lg.d_pg_bar + ps.d_zeta * alpha.dot(lg.d_pg_bar);
  if (lg.d_pf_bar.cwiseAbs().maxCoeff() > 0) {
    const FlowJacobian fj = flow_jacobian(st.v, st.theta, net);
    const MatrixXd dpf = fj.d_v.rightCols(lay.num_vd()) * ps.d_vd + fj.d_theta.rightCols(lay.nb - 1) * ps.d_theta;
    g += dpf.transpose() * lg.d_pf_bar;
  }
  return g;
}

// ---------------------------------------------------------------------------
// QP sensitivities.

/// Factorized KKT matrix
///
///   [ 2P         W'  S'              ]
///   [ W          0   0               ]
///   [ diag(mu)S  0   diag(S chi+Td-u)]
///
/// Complementarity rows are equilibrated by 1/max(mu_i, slack_i), which leaves
/// every solution unchanged. Active constraints with mu_i below
/// kWeakMultiplierTol are treated as inactive (their row becomes d mu_i = 0).
class KktSystem {
 public:
  KktSystem(const QpSolution& sol, const QpCanonical& qp) : n_(qp.n()), me_(qp.m_eq()), mi_(qp.m_in()) {
    const Eigen::Index dim = n_ + me_ + mi_;
    gamma_ = MatrixXd::Zero(dim, dim);
    gamma_.topLeftCorner(n_, n_) = 2.0 * qp.P;
    gamma_.block(0, n_, n_, me_) = qp.W.transpose();
    gamma_.block(0, n_ + me_, n_, mi_) = qp.S.transpose();
    gamma_.block(n_, 0, me_, n_) = qp.W;
    row_scale_ = VectorXd::Ones(dim);
    dropped_.assign(std::size_t(mi_), false);
    for (Eigen::Index i = 0; i < mi_; ++i) {
      const Eigen::Index r = n_ + me_ + i;
      const double slack = sol.slack[i];
      const double mu = sol.mu[i];
      if (slack <= kActiveSlackTol && mu < kWeakMultiplierTol) {
        dropped_[std::size_t(i)] = true;
        ++num_dropped_;
        gamma_(r, r) = 1.0;
        continue;
      }
      gamma_.block(r, 0, 1, n_) = mu * qp.S.row(i);
      gamma_(r, r) = -slack;
      const double s = 1.0 / std::max(mu, slack);
      row_scale_[r] = s;
    }
    scaled_ = row_scale_.asDiagonal() * gamma_;
    lu_.compute(scaled_);
    rcond_ = lu_.rcond();
    if (!(rcond_ * kMaxGammaCondition > 1.0)) {
      throw Error(ErrorKind::SingularGamma, "KKT matrix condition estimate " + std::to_string(1.0 / rcond_));
    }
  }

  /// Unscaled Gamma, with dropped rows replaced as described above.
  const MatrixXd& matrix() const { return gamma_; }
  double rcond() const { return rcond_; }
  int num_dropped() const { return num_dropped_; }
  bool dropped(Eigen::Index i) const { return dropped_[std::size_t(i)]; }
  Eigen::Index n() const { return n_; }
  Eigen::Index m_eq() const { return me_; }
  Eigen::Index m_in() const { return mi_; }

  /// Solves Gamma x = rhs.
  VectorXd solve(VectorXd rhs) const {
    for (Eigen::Index i = 0; i < mi_; ++i)
      if (dropped_[std::size_t(i)]) rhs[n_ + me_ + i] = 0.0;
    VectorXd x = lu_.solve(row_scale_.asDiagonal() * rhs);
    check(gamma_, x, rhs);
    return x;
  }

  /// Solves Gamma' y = rhs.
  VectorXd solve_transpose(const VectorXd& rhs) const {
    VectorXd z = lu_.transpose().solve(rhs);
    VectorXd y = row_scale_.asDiagonal() * z;
    check(scaled_.transpose(), z, rhs);
    return y;
  }

 private:
  static void check(const MatrixXd& a, const VectorXd& x, const VectorXd& b) {
    if (!x.allFinite() || detail::backward_error(a, x, b) > kSolveResidualTol) {
      throw Error(ErrorKind::SingularGamma, "inaccurate KKT solve");
    }
  }

  Eigen::Index n_, me_, mi_;
  MatrixXd gamma_;
  MatrixXd scaled_;
  VectorXd row_scale_;
  std::vector<bool> dropped_;
  int num_dropped_ = 0;
  Eigen::PartialPivLU<MatrixXd> lu_;
  double rcond_ = 0;
};

struct QpPerturbation {
  VectorXd d_chi;
  VectorXd d_lambda;
  VectorXd d_mu;
};

/// First-order change of (chi, lambda, mu) for W += dW, u_eq += du_eq, u_in += du_in.
inline QpPerturbation qp_sensitivity_rhs(const KktSystem& kkt, const QpSolution& sol, const MatrixXd& dW,
                                         const VectorXd& du_eq, const VectorXd& du_in) {
  const Eigen::Index n = kkt.n(), me = kkt.m_eq(), mi = kkt.m_in();
  VectorXd rhs(n + me + mi);
  rhs.head(n) = -(dW.transpose() * sol.lambda);
  rhs.segment(n, me) = -(dW * sol.chi + du_eq);
  rhs.tail(mi) = sol.mu.cwiseProduct(du_in);
  const VectorXd x = kkt.solve(rhs);
  return {x.head(n), x.segment(n, me), x.tail(mi)};
}

inline QpPerturbation qp_sensitivity_rhs(const QpSolution& sol, const QpCanonical& qp, const MatrixXd& dW,
                                         const VectorXd& du_eq, const VectorXd& du_in) {
  return qp_sensitivity_rhs(KktSystem(sol, qp), sol, dW, du_eq, du_in);
}

/// Adjoint quantities phi' = -[grad_chi, 0, 0] Gamma^-1 and the gradients
/// they yield for every QP parameter.
struct QpAdjoint {
  VectorXd phi_chi, phi_lambda, phi_mu;
  MatrixXd d_W;     // lambda phi_chi' + phi_lambda chi'
  VectorXd d_u_eq;  // phi_lambda
  VectorXd d_u_in;  // -mu .* phi_mu
};

inline QpAdjoint qp_adjoint(const KktSystem& kkt, const QpSolution& sol, const VectorXd& d_chi_loss) {
  const Eigen::Index n = kkt.n(), me = kkt.m_eq(), mi = kkt.m_in();
  VectorXd rhs = VectorXd::Zero(n + me + mi);
  rhs.head(n) = -d_chi_loss;
  const VectorXd phi = kkt.solve_transpose(rhs);
  QpAdjoint adj;
  adj.phi_chi = phi.head(n);
  adj.phi_lambda = phi.segment(n, me);
  adj.phi_mu = phi.tail(mi);
  adj.d_W = sol.lambda * adj.phi_chi.transpose() + adj.phi_lambda * sol.chi.transpose();
  adj.d_u_eq = adj.phi_lambda;
  adj.d_u_in = -sol.mu.cwiseProduct(adj.phi_mu);
  return adj;
}

using PsiGradients = LinCoeffs;

/// Maps QP parameter gradients onto (M, gamma, b) through the index map.
inline PsiGradients psi_gradients_from(const QpAdjoint& adj, const QpIndexMap& map) {
  PsiGradients g = LinCoeffs::zeros(map.ne, map.nb);
  for (Eigen::Index e = 0; e < map.ne; ++e) {
    for (Eigen::Index k = 0; k < map.nb; ++k) {
      const auto en = map.m_entry(e, k);
      g.M(e, k) = en.sign * adj.d_W(en.row, en.col);
    }
    const auto ge = map.gamma_entry(e);
    g.gamma[e] = ge.sign * adj.d_u_eq[ge.row];
  }
  for (Eigen::Index k = 0; k < map.nb; ++k) {
    const auto be = map.b_entry(k);
    g.b[k] = be.sign * adj.d_u_eq[be.row];
  }
  return g;
}

inline PsiGradients adjoint_psi_gradients(const QpSolution& sol, const QpCanonical& qp, const VectorXd& d_chi_loss) {
  const KktSystem kkt(sol, qp);
  return psi_gradients_from(qp_adjoint(kkt, sol, d_chi_loss), qp.map);
}

// ---------------------------------------------------------------------------
// Full scenario pipeline.

struct PipelineOptions {
  double epsilon = 1e-8;
  QpOptions qp;
  PfOptions pf;
};

/// Forward pass only: DC OPF, then the steady state it produces.
struct ForwardResult {
  QpCanonical qp;
  QpSolution sol;
  PfSetpoint setpoint;
  PfSteadyState state;
  LossReport report;
};

inline ForwardResult forward(const NetworkCase& net, const LinCoeffs& psi, const DemandScenario& scenario, double w,
                             const PipelineOptions& opt = {}) {
  ForwardResult fr;
  fr.qp = assemble(net, psi, scenario, opt.epsilon);
  fr.sol = solve(fr.qp, opt.qp);
  fr.setpoint = make_setpoint(net, fr.sol.pg(fr.qp.map), scenario);
  fr.state = solve_pf(fr.setpoint, net, opt.pf);
  fr.report = loss_of(fr.state, net, w);
  return fr;
}

struct ScenarioGradient {
  double loss = 0;
  PsiGradients grads;
  LossReport report;
  int dropped_constraints = 0;  // weakly active constraints treated as inactive
};

/// Loss of one scenario and its gradient with respect to Psi.
inline ScenarioGradient scenario_gradient(const NetworkCase& net, const LinCoeffs& psi, const DemandScenario& scenario,
                                          double w, const PipelineOptions& opt = {}) {
  const ForwardResult fr = forward(net, psi, scenario, w, opt);
  const LossGradients lg = loss_subgradient(fr.state, net, w);
  const PfSensitivities ps = pf_sensitivities(fr.state, fr.setpoint, net);
  const VectorXd d_pg_dc = chain_to_dispatch(lg, ps, fr.state, net);

  VectorXd d_chi = VectorXd::Zero(fr.qp.n());
  d_chi.segment(fr.qp.map.pg_offset(), fr.qp.map.ng) = d_pg_dc;
  const KktSystem kkt(fr.sol, fr.qp);

  ScenarioGradient out;
  out.loss = fr.report.loss;
  out.report = fr.report;
  out.grads = psi_gradients_from(qp_adjoint(kkt, fr.sol, d_chi), fr.qp.map);
  out.dropped_constraints = kkt.num_dropped();
  return out;
}

}  // namespace optlin

#endif  // OPTLIN_SENSITIVITY_HPP
