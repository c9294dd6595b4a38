#ifndef OPTLIN_DCOPF_QP_HPP
#define OPTLIN_DCOPF_QP_HPP

// Parameterized DC OPF in canonical form
//
//   chi* = argmin chi' P chi   s.t.  W chi + u_eq = R d,   S chi + T d <= u_in
//
// with chi = [p_g; theta; p_f] and d = p_d.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

#include "optlin/errors.hpp"
#include "optlin/grid_model.hpp"
#include "optlin/lin_coeffs.hpp"
#include "optlin/qp_solver.hpp"

namespace optlin {

enum class LimitKind { PgUpper, PgLower, PfUpper, PfLower };

/// Where each piece of the DC OPF lives inside the canonical QP.
///
/// Equality rows: [0, E) flow definition p_f - M theta - gamma = 0;
/// [E, E+N) nodal balance F_g p_g - A' p_f - b = p_d; row E+N is theta_1 = 0.
/// W stores -M, and u_eq stores -gamma and -b.
struct QpIndexMap {
  Eigen::Index ng = 0, nb = 0, ne = 0;
  std::vector<LimitKind> limit_kind;     // per inequality row
  std::vector<Eigen::Index> limit_index; // generator or branch index per row

  Eigen::Index pg_offset() const { return 0; }
  Eigen::Index theta_offset() const { return ng; }
  Eigen::Index pf_offset() const { return ng + nb; }
  Eigen::Index num_vars() const { return ng + nb + ne; }

  Eigen::Index flow_row(Eigen::Index e) const { return e; }
  Eigen::Index balance_row(Eigen::Index n) const { return ne + n; }
  Eigen::Index reference_row() const { return ne + nb; }
  Eigen::Index num_equalities() const { return ne + nb + 1; }

  struct Entry {
    Eigen::Index row, col;
    double sign;  // stored value = sign * parameter
  };
  Entry m_entry(Eigen::Index e, Eigen::Index k) const { return {flow_row(e), theta_offset() + k, -1.0}; }
  Entry gamma_entry(Eigen::Index e) const { return {flow_row(e), -1, -1.0}; }
  Entry b_entry(Eigen::Index n) const { return {balance_row(n), -1, -1.0}; }
};

struct QpCanonical {
  Eigen::MatrixXd P;
  Eigen::MatrixXd W;
  Eigen::VectorXd u_eq;
  Eigen::MatrixXd R;
  Eigen::MatrixXd S;
  Eigen::MatrixXd T;
  Eigen::VectorXd u_in;
  Eigen::VectorXd d;
  QpIndexMap map;

  Eigen::Index n() const { return P.rows(); }
  Eigen::Index m_eq() const { return W.rows(); }
  Eigen::Index m_in() const { return S.rows(); }

  QpProblem problem() const {
    return {P, Eigen::VectorXd::Zero(P.rows()), W, R * d - u_eq, S, u_in - T * d};
  }

  /// Reads Psi back out of W and u_eq through the index map.
  LinCoeffs extract_psi() const {
    LinCoeffs psi = LinCoeffs::zeros(map.ne, map.nb);
    for (Eigen::Index e = 0; e < map.ne; ++e) {
      for (Eigen::Index k = 0; k < map.nb; ++k) {
        auto en = map.m_entry(e, k);
        psi.M(e, k) = W(en.row, en.col) / en.sign;
      }
      psi.gamma[e] = u_eq[map.gamma_entry(e).row] / map.gamma_entry(e).sign;
    }
    for (Eigen::Index k = 0; k < map.nb; ++k) psi.b[k] = u_eq[map.b_entry(k).row] / map.b_entry(k).sign;
    return psi;
  }
};

/// Builds the canonical QP. `epsilon` regularizes the theta and p_f blocks.
/// Flow limits that are infinite (unrated branches) produce no rows.
inline QpCanonical assemble(const NetworkCase& net, const LinCoeffs& psi, const DemandScenario& demand,
                            double epsilon = 1e-8) {
  const auto ng = Eigen::Index(net.num_gens());
  const auto nb = Eigen::Index(net.num_buses());
  const auto ne = Eigen::Index(net.num_branches());
  if (psi.M.rows() != ne || psi.M.cols() != nb || psi.gamma.size() != ne || psi.b.size() != nb ||
      demand.p_d.size() != nb) {
    throw Error(ErrorKind::ShapeMismatch, "coefficients or demand do not match the case");
  }
  QpCanonical qp;
  auto& map = qp.map;
  map.ng = ng, map.nb = nb, map.ne = ne;
  const Eigen::Index n = ng + nb + ne;

  qp.P = Eigen::MatrixXd::Zero(n, n);
  const Eigen::VectorXd c = net.cost();
  for (Eigen::Index i = 0; i < ng; ++i) qp.P(i, i) = c[i];
  for (Eigen::Index i = ng; i < n; ++i) qp.P(i, i) = epsilon;

  const Eigen::MatrixXd a = incidence(net);
  const Eigen::Index me = map.num_equalities();
  qp.W = Eigen::MatrixXd::Zero(me, n);
  qp.u_eq = Eigen::VectorXd::Zero(me);
  qp.R = Eigen::MatrixXd::Zero(me, nb);
  // flow definition
  qp.W.block(0, map.theta_offset(), ne, nb) = -psi.M;
  qp.W.block(0, map.pf_offset(), ne, ne).setIdentity();
  qp.u_eq.head(ne) = -psi.gamma;
  // nodal balance
  for (Eigen::Index i = 0; i < ng; ++i) qp.W(map.balance_row(net.gens[std::size_t(i)].bus), i) = 1.0;
  qp.W.block(ne, map.pf_offset(), nb, ne) = -a.transpose();
  qp.u_eq.segment(ne, nb) = -psi.b;
  qp.R.block(ne, 0, nb, nb).setIdentity();
  // angle reference
  qp.W(map.reference_row(), map.theta_offset()) = 1.0;

  const Eigen::VectorXd pgmax = net.pg_max();
  const Eigen::VectorXd pfmax = net.pf_max();
  std::vector<Eigen::Index> rated;
  for (Eigen::Index e = 0; e < ne; ++e)
    if (std::isfinite(pfmax[e])) rated.push_back(e);
  const Eigen::Index mi = 2 * ng + 2 * Eigen::Index(rated.size());
  qp.S = Eigen::MatrixXd::Zero(mi, n);
  qp.T = Eigen::MatrixXd::Zero(mi, nb);
  qp.u_in = Eigen::VectorXd::Zero(mi);
  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i < ng; ++i, ++row) {
    qp.S(row, i) = 1.0;
    qp.u_in[row] = pgmax[i];
    map.limit_kind.push_back(LimitKind::PgUpper);
    map.limit_index.push_back(i);
  }
  for (Eigen::Index i = 0; i < ng; ++i, ++row) {
    qp.S(row, i) = -1.0;
    map.limit_kind.push_back(LimitKind::PgLower);
    map.limit_index.push_back(i);
  }
  for (auto e : rated) {
    qp.S(row, map.pf_offset() + e) = 1.0;
    qp.u_in[row] = pfmax[e];
    map.limit_kind.push_back(LimitKind::PfUpper);
    map.limit_index.push_back(e);
    ++row;
  }
  for (auto e : rated) {
    qp.S(row, map.pf_offset() + e) = -1.0;
    qp.u_in[row] = pfmax[e];
    map.limit_kind.push_back(LimitKind::PfLower);
    map.limit_index.push_back(e);
    ++row;
  }
  qp.d = demand.p_d;
  return qp;
}

/// Constraint n is treated as active when its slack is at most this.
inline constexpr double kActiveSlackTol = 1e-7;

struct QpSolution {
  Eigen::VectorXd chi;
  Eigen::VectorXd lambda;
  Eigen::VectorXd mu;
  Eigen::VectorXd slack;  // u_in - T d - S chi >= 0
  std::vector<Eigen::Index> active_set;
  double objective = 0;
  int iterations = 0;

  Eigen::VectorXd pg(const QpIndexMap& m) const { return chi.segment(m.pg_offset(), m.ng); }
  Eigen::VectorXd theta(const QpIndexMap& m) const { return chi.segment(m.theta_offset(), m.nb); }
  Eigen::VectorXd pf(const QpIndexMap& m) const { return chi.segment(m.pf_offset(), m.ne); }
};

inline QpSolution solve(const QpCanonical& qp, const QpOptions& opt = {}) {
  const QpProblem prob = qp.problem();
  QpResult r = solve_qp(prob, opt);
  QpSolution sol;
  sol.chi = r.x;
  sol.lambda = r.lambda;
  sol.mu = r.mu;
  sol.slack = r.slack;
  sol.iterations = r.iterations;
  sol.objective = r.x.dot(qp.P * r.x);
  for (Eigen::Index i = 0; i < sol.slack.size(); ++i)
    if (sol.slack[i] <= kActiveSlackTol) sol.active_set.push_back(i);
  return sol;
}

inline KktResiduals kkt_residuals(const QpCanonical& qp, const QpSolution& sol) {
  QpResult r{sol.chi, sol.lambda, sol.mu, sol.slack, sol.iterations, true};
  return kkt_residuals(qp.problem(), r);
}

/// Lagrangian dual value at (chi, lambda, mu); equals the primal objective at
/// a KKT point.
inline double dual_objective(const QpCanonical& qp, const QpSolution& sol) {
  const QpProblem p = qp.problem();
  return sol.chi.dot(qp.P * sol.chi) + sol.lambda.dot(p.W * sol.chi - p.e) + sol.mu.dot(p.S * sol.chi - p.h);
}

struct AssumptionReport {
  double min_active_mu = std::numeric_limits<double>::infinity();
  double min_inactive_slack = std::numeric_limits<double>::infinity();
  Eigen::Index constraint_rows = 0;  // rows of [W; S_active]
  Eigen::Index constraint_rank = 0;
  double min_reduced_hessian_eig = std::numeric_limits<double>::infinity();
  std::vector<Eigen::Index> weakly_active;  // active with mu below tol_strict
  bool strict_complementarity = true;
  bool independent_constraints = true;
  bool second_order = true;
  bool degenerate = false;
};

/// Checks strict complementarity, linear independence of active constraint
/// gradients and positive curvature on their null space.
inline AssumptionReport check_assumptions(const QpSolution& sol, const QpCanonical& qp, double tol_strict = 1e-7) {
  AssumptionReport rep;
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < sol.slack.size(); ++i) {
    if (sol.slack[i] <= kActiveSlackTol) {
      active.push_back(i);
      rep.min_active_mu = std::min(rep.min_active_mu, sol.mu[i]);
      if (sol.mu[i] < tol_strict) rep.weakly_active.push_back(i);
    } else {
      rep.min_inactive_slack = std::min(rep.min_inactive_slack, sol.slack[i]);
    }
  }
  rep.strict_complementarity = rep.min_active_mu >= tol_strict && rep.min_inactive_slack >= tol_strict;

  const Eigen::Index n = qp.n();
  Eigen::MatrixXd g(qp.m_eq() + Eigen::Index(active.size()), n);
  g.topRows(qp.m_eq()) = qp.W;
  for (std::size_t a = 0; a < active.size(); ++a) g.row(qp.m_eq() + Eigen::Index(a)) = qp.S.row(active[a]);
  rep.constraint_rows = g.rows();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(g);
  lu.setThreshold(1e-10);
  rep.constraint_rank = lu.rank();
  rep.independent_constraints = rep.constraint_rank == rep.constraint_rows;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(g, Eigen::ComputeFullV);
  const Eigen::Index null_dim = n - rep.constraint_rank;
  if (null_dim > 0) {
    Eigen::MatrixXd z = svd.matrixV().rightCols(null_dim);
    Eigen::MatrixXd h = z.transpose() * (2.0 * qp.P) * z;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    rep.min_reduced_hessian_eig = es.eigenvalues().minCoeff();
    rep.second_order = rep.min_reduced_hessian_eig > 0;
  }
  rep.degenerate = !(rep.strict_complementarity && rep.independent_constraints && rep.second_order);
  return rep;
}

}  // namespace optlin

#endif  // OPTLIN_DCOPF_QP_HPP
