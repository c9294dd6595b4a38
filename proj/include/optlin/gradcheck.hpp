#ifndef OPTLIN_GRADCHECK_HPP
#define OPTLIN_GRADCHECK_HPP

// Finite-difference checks of the analytic sensitivities.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "optlin/dcopf_qp.hpp"
#include "optlin/lin_coeffs.hpp"
#include "optlin/sensitivity.hpp"

namespace optlin {

/// |a - b| / max(|a|, |b|, floor)
inline double rel_error(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + std::ptrdiff_t(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

// ---------------------------------------------------------------------------
// QP perturbation directions against re-solves.

struct DirectionCheck {
  VectorXd analytic;  // d chi from the KKT linear system
  VectorXd numeric;   // central difference of re-solved optima
  double rel_error = 0;
  bool active_set_changed = false;
};

/// Perturbs (W, u_eq, u_in) along (dW, du_eq, du_in) by +-h and re-solves.
inline DirectionCheck check_direction(const QpCanonical& qp, const QpSolution& sol, const MatrixXd& dW,
                                      const VectorXd& du_eq, const VectorXd& du_in, double h = 1e-6,
                                      const QpOptions& opt = {}) {
  DirectionCheck out;
  out.analytic = qp_sensitivity_rhs(sol, qp, dW, du_eq, du_in).d_chi;
  auto shifted = [&](double s) {
    QpCanonical q = qp;
    q.W += s * dW;
    q.u_eq += s * du_eq;
    q.u_in += s * du_in;
    return solve(q, opt);
  };
  const QpSolution plus = shifted(h), minus = shifted(-h);
  out.active_set_changed = plus.active_set != sol.active_set || minus.active_set != sol.active_set;
  out.numeric = (plus.chi - minus.chi) / (2 * h);
  // central differences resolve derivatives only to about eps * |chi| / h
  const double noise = 1e4 * std::numeric_limits<double>::epsilon() * std::max(1.0, sol.chi.cwiseAbs().maxCoeff()) / h;
  const double scale = std::max({out.analytic.cwiseAbs().maxCoeff(), out.numeric.cwiseAbs().maxCoeff(), noise});
  out.rel_error = (out.analytic - out.numeric).cwiseAbs().maxCoeff() / scale;
  return out;
}

// ---------------------------------------------------------------------------
// Full-pipeline gradient with respect to Psi.

enum class PsiGroup { M, Gamma, B };

inline const char* group_name(PsiGroup g) {
  switch (g) {
    case PsiGroup::M: return "M";
    case PsiGroup::Gamma: return "gamma";
    case PsiGroup::B: return "b";
  }
  return "?";
}

struct CoordinateCheck {
  PsiGroup group = PsiGroup::M;
  Eigen::Index row = 0, col = 0;
  double analytic = 0;
  double numeric = 0;
  double rel_error = 0;
  bool excluded = false;
  std::string reason;  // "active-set" or "kink"
};

struct PsiGradCheck {
  std::vector<CoordinateCheck> coords;
  double loss = 0;
  std::size_t num_excluded = 0;
  double median_rel_error = 0;  // over included coordinates
  double max_rel_error = 0;
  double excluded_fraction() const { return coords.empty() ? 0.0 : double(num_excluded) / double(coords.size()); }
};

namespace detail {

inline double& coordinate(LinCoeffs& psi, PsiGroup g, Eigen::Index r, Eigen::Index c) {
  switch (g) {
    case PsiGroup::M: return psi.M(r, c);
    case PsiGroup::Gamma: return psi.gamma[r];
    default: return psi.b[r];
  }
}

/// Generator and signed flow violation indicators.
inline std::vector<int> kink_pattern(const PfSteadyState& st, const NetworkCase& net) {
  std::vector<int> pat;
  const VectorXd pmax = net.pg_max(), fmax = net.pf_max();
  for (Eigen::Index i = 0; i < pmax.size(); ++i) pat.push_back(st.p_g_bar[i] - pmax[i] > kViolationTol);
  for (Eigen::Index e = 0; e < fmax.size(); ++e) {
    if (!std::isfinite(fmax[e])) continue;
    const double f = st.p_f_bar[e];
    pat.push_back(std::abs(f) - fmax[e] > kViolationTol ? (f > 0 ? 1 : -1) : 0);
  }
  return pat;
}

}  // namespace detail

/// Compares the adjoint gradient with central differences of the full
/// pipeline loss on every coordinate of Psi. Coordinates whose +-h
/// perturbation changes the QP active set or a loss kink are excluded.
inline PsiGradCheck check_psi_gradient(const NetworkCase& net, const LinCoeffs& psi, const DemandScenario& scenario,
                                       double w, double h = 1e-6, const PipelineOptions& opt = {}) {
  const ScenarioGradient sg = scenario_gradient(net, psi, scenario, w, opt);
  const ForwardResult base = forward(net, psi, scenario, w, opt);
  const auto base_kinks = detail::kink_pattern(base.state, net);

  PsiGradCheck out;
  out.loss = sg.loss;
  LinCoeffs grads = sg.grads;
  auto visit = [&](PsiGroup g, Eigen::Index r, Eigen::Index c) {
    CoordinateCheck cc{g, r, c};
    LinCoeffs p = psi;
    double& x = detail::coordinate(p, g, r, c);
    const double x0 = x;
    x = x0 + h;
    const ForwardResult fp = forward(net, p, scenario, w, opt);
    x = x0 - h;
    const ForwardResult fm = forward(net, p, scenario, w, opt);
    cc.analytic = detail::coordinate(grads, g, r, c);
    cc.numeric = (fp.report.loss - fm.report.loss) / (2 * h);
    cc.rel_error = rel_error(cc.analytic, cc.numeric);
    if (fp.sol.active_set != base.sol.active_set || fm.sol.active_set != base.sol.active_set) {
      cc.excluded = true, cc.reason = "active-set";
    } else if (detail::kink_pattern(fp.state, net) != base_kinks || detail::kink_pattern(fm.state, net) != base_kinks) {
      cc.excluded = true, cc.reason = "kink";
    }
    out.coords.push_back(cc);
  };
  for (Eigen::Index e = 0; e < psi.M.rows(); ++e)
    for (Eigen::Index k = 0; k < psi.M.cols(); ++k) visit(PsiGroup::M, e, k);
  for (Eigen::Index e = 0; e < psi.gamma.size(); ++e) visit(PsiGroup::Gamma, e, 0);
  for (Eigen::Index k = 0; k < psi.b.size(); ++k) visit(PsiGroup::B, k, 0);

  std::vector<double> errs;
  for (const auto& c : out.coords) {
    if (c.excluded) {
      ++out.num_excluded;
      continue;
    }
    errs.push_back(c.rel_error);
    out.max_rel_error = std::max(out.max_rel_error, c.rel_error);
  }
  out.median_rel_error = median(errs);
  return out;
}

/// Adjoint gradient over every W entry against the per-entry directional
/// route g' d chi(dW = e_i e_j'). Returns the largest absolute difference
/// relative to max(1, |entry|).
inline double adjoint_direct_gap(const QpCanonical& qp, const QpSolution& sol, const VectorXd& d_chi_loss) {
  const KktSystem kkt(sol, qp);
  const QpAdjoint adj = qp_adjoint(kkt, sol, d_chi_loss);
  const VectorXd zero_eq = VectorXd::Zero(qp.m_eq()), zero_in = VectorXd::Zero(qp.m_in());
  double gap = 0;
  MatrixXd dW = MatrixXd::Zero(qp.m_eq(), qp.n());
  for (Eigen::Index i = 0; i < qp.m_eq(); ++i) {
    for (Eigen::Index j = 0; j < qp.n(); ++j) {
      dW(i, j) = 1.0;
      const double direct = d_chi_loss.dot(qp_sensitivity_rhs(kkt, sol, dW, zero_eq, zero_in).d_chi);
      dW(i, j) = 0.0;
      gap = std::max(gap, std::abs(direct - adj.d_W(i, j)) / std::max(1.0, std::abs(direct)));
    }
  }
  return gap;
}

}  // namespace optlin

#endif  // OPTLIN_GRADCHECK_HPP
