#ifndef OPTLIN_QP_SOLVER_HPP
#define OPTLIN_QP_SOLVER_HPP

// Dense convex QP solver:
//
//   minimize    x' P x + q' x
//   subject to  W x = e        : lambda
//               S x <= h       : mu >= 0
//
// Lagrangian sign convention: 2 P x + q + W' lambda + S' mu = 0.
//
// Mehrotra predictor-corrector interior point, followed by a polish step
// that re-solves the KKT system on the identified active set so that
// complementarity holds exactly. Infeasibility is classified with a
// phase-one problem when the main iteration fails.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "optlin/errors.hpp"

namespace optlin {

struct QpProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd W;
  Eigen::VectorXd e;
  Eigen::MatrixXd S;
  Eigen::VectorXd h;
};

struct QpOptions {
  int max_iterations = 100;
  double tolerance = 1e-11;
  bool polish = true;
};

struct QpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;
  Eigen::VectorXd mu;
  Eigen::VectorXd slack;  // h - S x
  int iterations = 0;
  bool polished = false;
};

struct KktResiduals {
  double stationarity = 0;     // |2Px + q + W'lambda + S'mu|_inf
  double equality = 0;         // |Wx - e|_inf
  double inequality = 0;       // max(0, max(Sx - h))
  double dual_feasibility = 0; // max(0, -min(mu))
  double complementarity = 0;  // max |mu_i * slack_i|

  double max() const {
    return std::max({stationarity, equality, inequality, dual_feasibility, complementarity});
  }
};

inline KktResiduals kkt_residuals(const QpProblem& qp, const QpResult& r) {
  KktResiduals k;
  Eigen::VectorXd stat = 2.0 * qp.P * r.x + qp.q + qp.W.transpose() * r.lambda + qp.S.transpose() * r.mu;
  k.stationarity = stat.size() ? stat.cwiseAbs().maxCoeff() : 0.0;
  if (qp.W.rows() > 0) k.equality = (qp.W * r.x - qp.e).cwiseAbs().maxCoeff();
  if (qp.S.rows() > 0) {
    Eigen::VectorXd slack = qp.h - qp.S * r.x;
    k.inequality = std::max(0.0, -slack.minCoeff());
    k.dual_feasibility = std::max(0.0, -r.mu.minCoeff());
    k.complementarity = r.mu.cwiseProduct(slack).cwiseAbs().maxCoeff();
  }
  return k;
}

namespace detail {

inline double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double a = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0) a = std::min(a, -v[i] / dv[i]);
  return a;
}

inline double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

enum class IpmStatus { Converged, Failed };

inline IpmStatus run_ipm(const QpProblem& qp, const QpOptions& opt, QpResult& out) {
  const Eigen::Index n = qp.P.rows();
  const Eigen::Index me = qp.W.rows();
  const Eigen::Index mi = qp.S.rows();
  const Eigen::MatrixXd P2 = 2.0 * qp.P;
  const Eigen::MatrixXd St = qp.S.transpose();

  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + me, n + me);
  K.topRightCorner(n, me) = qp.W.transpose();
  K.bottomLeftCorner(me, n) = qp.W;

  // Initial point: least-squares-like KKT solve, then shift slack and
  // multipliers into the interior.
  Eigen::VectorXd x(n), lam(me), s(mi), mu(mi);
  {
    K.topLeftCorner(n, n) = P2 + St * qp.S;
    Eigen::VectorXd rhs(n + me);
    rhs << -qp.q + St * qp.h, qp.e;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
    Eigen::VectorXd sol = lu.solve(rhs);
    if (!sol.allFinite()) sol.setZero();
    x = sol.head(n);
    lam = sol.tail(me);
    Eigen::VectorXd z = qp.S * x - qp.h;
    s = -z;
    mu = z;
    if (mi > 0) {
      double ts = (-s).maxCoeff();
      if (ts >= -1e-8) s.array() += 1.0 + ts;
      double tz = (-mu).maxCoeff();
      if (tz >= -1e-8) mu.array() += 1.0 + tz;
    }
  }

  const double scale_d = 1.0 + inf_norm(qp.q);
  const double scale_e = 1.0 + inf_norm(qp.e);
  const double scale_h = 1.0 + inf_norm(qp.h);

  for (int it = 1; it <= opt.max_iterations; ++it) {
    out.iterations = it;
    Eigen::VectorXd rd = P2 * x + qp.q + qp.W.transpose() * lam + St * mu;
    Eigen::VectorXd rp = qp.W * x - qp.e;
    Eigen::VectorXd ri = qp.S * x + s - qp.h;
    const double gap = mi > 0 ? s.dot(mu) / double(mi) : 0.0;

    if (!(rd.allFinite() && rp.allFinite() && ri.allFinite() && std::isfinite(gap))) return IpmStatus::Failed;
    if (inf_norm(rd) <= opt.tolerance * scale_d && inf_norm(rp) <= opt.tolerance * scale_e &&
        inf_norm(ri) <= opt.tolerance * scale_h && gap <= opt.tolerance) {
      out.x = x, out.lambda = lam, out.mu = mu, out.slack = s;
      return IpmStatus::Converged;
    }
    if (inf_norm(x) > 1e12) return IpmStatus::Failed;

    Eigen::VectorXd dvec = mu.cwiseQuotient(s);
    K.topLeftCorner(n, n) = P2 + St * dvec.asDiagonal() * qp.S;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);

    auto direction = [&](const Eigen::VectorXd& rc, Eigen::VectorXd& dx, Eigen::VectorXd& dl, Eigen::VectorXd& ds,
                         Eigen::VectorXd& dm) {
      Eigen::VectorXd g = (-rc + mu.cwiseProduct(ri)).cwiseQuotient(s);
      Eigen::VectorXd rhs(n + me);
      rhs << -rd - St * g, -rp;
      Eigen::VectorXd sol = lu.solve(rhs);
      dx = sol.head(n);
      dl = sol.tail(me);
      ds = -ri - qp.S * dx;
      dm = dvec.cwiseProduct(qp.S * dx) + g;
    };

    Eigen::VectorXd dx, dl, ds, dm;
    if (mi == 0) {
      direction(Eigen::VectorXd(), dx, dl, ds, dm);
      x += dx;
      lam += dl;
      continue;
    }
    Eigen::VectorXd rc = s.cwiseProduct(mu);
    direction(rc, dx, dl, ds, dm);
    if (!dx.allFinite()) return IpmStatus::Failed;
    const double a_aff = std::min(max_step(s, ds), max_step(mu, dm));
    const double gap_aff = (s + a_aff * ds).dot(mu + a_aff * dm) / double(mi);
    const double sigma = std::pow(gap_aff / gap, 3);

    rc += ds.cwiseProduct(dm);
    rc.array() -= sigma * gap;
    direction(rc, dx, dl, ds, dm);
    if (!dx.allFinite()) return IpmStatus::Failed;
    const double a = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(mu, dm)));
    x += a * dx;
    lam += a * dl;
    s += a * ds;
    mu += a * dm;
  }
  out.x = x, out.lambda = lam, out.mu = mu, out.slack = s;
  return IpmStatus::Failed;
}

// Re-solves the equality-constrained KKT system with the active set fixed.
// Starts from the set identified by the interior point and repairs it by
// single swaps when the guess is off (near-degenerate bounds).
inline bool polish(const QpProblem& qp, QpResult& r) {
  const Eigen::Index n = qp.P.rows();
  const Eigen::Index me = qp.W.rows();
  const Eigen::Index mi = qp.S.rows();
  std::vector<char> in_set(std::size_t(mi), 0);
  for (Eigen::Index i = 0; i < mi; ++i) in_set[std::size_t(i)] = r.slack[i] < r.mu[i];
  const double tol = 1e-9 * (1.0 + inf_norm(r.mu));
  const double tol_s = 1e-9 * (1.0 + inf_norm(qp.h));

  for (int round = 0; round <= 2 * mi; ++round) {
    std::vector<Eigen::Index> active;
    for (Eigen::Index i = 0; i < mi; ++i)
      if (in_set[std::size_t(i)]) active.push_back(i);
    const auto na = static_cast<Eigen::Index>(active.size());

    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + me + na, n + me + na);
    Eigen::VectorXd rhs(n + me + na);
    K.topLeftCorner(n, n) = 2.0 * qp.P;
    K.block(0, n, n, me) = qp.W.transpose();
    K.block(n, 0, me, n) = qp.W;
    rhs.head(n) = -qp.q;
    rhs.segment(n, me) = qp.e;
    for (Eigen::Index a = 0; a < na; ++a) {
      K.block(0, n + me + a, n, 1) = qp.S.row(active[a]).transpose();
      K.block(n + me + a, 0, 1, n) = qp.S.row(active[a]);
      rhs[n + me + a] = qp.h[active[a]];
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
    if (!(lu.rcond() > 1e-15)) return false;
    Eigen::VectorXd sol = lu.solve(rhs);
    for (int k = 0; k < 2; ++k) sol += lu.solve(rhs - K * sol);
    if (!sol.allFinite()) return false;

    Eigen::VectorXd x = sol.head(n);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(mi);
    for (Eigen::Index a = 0; a < na; ++a) mu[active[a]] = sol[n + me + a];
    Eigen::VectorXd slack = qp.h - qp.S * x;

    if (mi > 0) {
      Eigen::Index worst_mu, worst_s;
      const double min_mu = mu.minCoeff(&worst_mu);
      Eigen::VectorXd free_slack = slack;
      for (auto a : active) free_slack[a] = std::numeric_limits<double>::infinity();
      const double min_s = free_slack.minCoeff(&worst_s);
      if (min_mu < -tol) {
        in_set[std::size_t(worst_mu)] = 0;
        continue;
      }
      if (min_s < -tol_s) {
        in_set[std::size_t(worst_s)] = 1;
        continue;
      }
    }
    for (auto a : active) {
      mu[a] = std::max(0.0, mu[a]);
      slack[a] = std::max(0.0, slack[a]);
    }
    r.x = x;
    r.lambda = sol.segment(n, me);
    r.mu = mu;
    r.slack = slack;
    r.polished = true;
    return true;
  }
  return false;
}

// Looks for d with P d = 0, W d = 0, S d <= 0, |d| <= 1 and q'd < 0.
inline bool has_descent_ray(const QpProblem& qp, const QpOptions& opt) {
  const Eigen::Index n = qp.P.rows();
  const Eigen::Index mi = qp.S.rows();
  QpProblem ray;
  ray.P = Eigen::MatrixXd::Identity(n, n) * 1e-10;
  ray.q = qp.q;
  ray.W = Eigen::MatrixXd(qp.W.rows() + n, n);
  ray.W << qp.W, qp.P;
  ray.e = Eigen::VectorXd::Zero(ray.W.rows());
  ray.S = Eigen::MatrixXd(mi + 2 * n, n);
  ray.S << qp.S, Eigen::MatrixXd::Identity(n, n), -Eigen::MatrixXd::Identity(n, n);
  ray.h = Eigen::VectorXd::Zero(mi + 2 * n);
  ray.h.tail(2 * n).setOnes();
  // P d = 0 duplicates rows of W when P is singular; drop dependent rows first.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(ray.W.transpose());
  qr.setThreshold(1e-12);
  const Eigen::Index rank = qr.rank();
  Eigen::MatrixXd basis = qr.householderQ() * Eigen::MatrixXd::Identity(n, rank);
  ray.W = basis.transpose();
  ray.e = Eigen::VectorXd::Zero(rank);
  QpResult r;
  if (run_ipm(ray, opt, r) != IpmStatus::Converged) return false;
  return qp.q.dot(r.x) < -1e-9 * (1.0 + inf_norm(qp.q));
}

}  // namespace detail

inline QpResult solve_qp(const QpProblem& qp, const QpOptions& opt = {}) {
  const Eigen::Index n = qp.P.rows();
  if (qp.P.cols() != n || qp.q.size() != n || qp.W.cols() != n || qp.e.size() != qp.W.rows() ||
      qp.S.cols() != n || qp.h.size() != qp.S.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "inconsistent QP dimensions");
  }
  if (!qp.h.allFinite() || !qp.e.allFinite()) throw Error(ErrorKind::ShapeMismatch, "non-finite QP data");

  QpResult r;
  if (detail::run_ipm(qp, opt, r) == detail::IpmStatus::Converged) {
    if (opt.polish) detail::polish(qp, r);
    if (!r.polished) r.slack = qp.h - qp.S * r.x;
    return r;
  }

  // Phase one: minimize t s.t. W x = e, S x - t <= h, t >= -1.
  const Eigen::Index me = qp.W.rows();
  const Eigen::Index mi = qp.S.rows();
  QpProblem p1;
  p1.P = Eigen::MatrixXd::Zero(n + 1, n + 1);
  p1.P.topLeftCorner(n, n).diagonal().setConstant(1e-10);
  p1.q = Eigen::VectorXd::Zero(n + 1);
  p1.q[n] = 1.0;
  p1.W = Eigen::MatrixXd::Zero(me, n + 1);
  p1.W.leftCols(n) = qp.W;
  p1.e = qp.e;
  p1.S = Eigen::MatrixXd::Zero(mi + 1, n + 1);
  p1.S.topLeftCorner(mi, n) = qp.S;
  p1.S.col(n).head(mi).setConstant(-1.0);
  p1.S(mi, n) = -1.0;
  p1.h = Eigen::VectorXd::Zero(mi + 1);
  p1.h.head(mi) = qp.h;
  p1.h[mi] = 1.0;
  QpResult r1;
  QpOptions o1 = opt;
  o1.max_iterations = std::max(opt.max_iterations, 200);
  if (detail::run_ipm(p1, o1, r1) != detail::IpmStatus::Converged) {
    throw Error(ErrorKind::Infeasible, "equality constraints are inconsistent");
  }
  const double t = r1.x[n];
  if (t > 1e-7 * (1.0 + detail::inf_norm(qp.h))) {
    throw Error(ErrorKind::Infeasible, "minimum constraint violation " + std::to_string(t));
  }
  if (detail::has_descent_ray(qp, o1)) throw Error(ErrorKind::Unbounded, "objective decreases along a feasible ray");
  throw Error(ErrorKind::MaxIterations, "interior point did not converge in " +
                                            std::to_string(opt.max_iterations) + " iterations");
}

}  // namespace optlin

#endif  // OPTLIN_QP_SOLVER_HPP
