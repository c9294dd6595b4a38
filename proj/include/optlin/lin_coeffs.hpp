#ifndef OPTLIN_LIN_COEFFS_HPP
#define OPTLIN_LIN_COEFFS_HPP

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <string>

#include "optlin/errors.hpp"
#include "optlin/grid_model.hpp"

namespace optlin {

/// Trainable linearization p_f = M*theta + gamma, p = A^T p_f + b.
/// Stored densely: descent updates fill in M.
struct LinCoeffs {
  MatrixXd M;      // E x N
  VectorXd gamma;  // E
  VectorXd b;      // N

  Eigen::Index num_branches() const { return M.rows(); }
  Eigen::Index num_buses() const { return M.cols(); }

  bool same_shape(const LinCoeffs& o) const {
    return M.rows() == o.M.rows() && M.cols() == o.M.cols() && gamma.size() == o.gamma.size() &&
           b.size() == o.b.size() && gamma.size() == M.rows() && b.size() == M.cols();
  }

  bool all_finite() const { return M.allFinite() && gamma.allFinite() && b.allFinite(); }

  static LinCoeffs zeros(Eigen::Index branches, Eigen::Index buses) {
    return {MatrixXd::Zero(branches, buses), VectorXd::Zero(branches), VectorXd::Zero(buses)};
  }

  LinCoeffs& operator+=(const LinCoeffs& o) {
    M += o.M;
    gamma += o.gamma;
    b += o.b;
    return *this;
  }
};

/// Classical DC power flow: M = diag(x)^-1 A, gamma = 0, b = 0.
inline LinCoeffs init_classical(const NetworkCase& net) {
  const MatrixXd a = incidence(net);
  const VectorXd x = net.reactance();
  LinCoeffs psi = LinCoeffs::zeros(a.rows(), a.cols());
  psi.M = x.cwiseInverse().asDiagonal() * a;
  return psi;
}

/// Per-group multipliers on the step size.
struct GroupScale {
  double m = 1.0;
  double gamma = 1.0;
  double b = 1.0;
};

/// psi - (step / divisor) * grads, with optional per-group scaling.
inline LinCoeffs apply_update(const LinCoeffs& psi, const LinCoeffs& grads, double step, double divisor = 1.0,
                              GroupScale scale = {}) {
  if (!psi.same_shape(grads)) throw Error(ErrorKind::ShapeMismatch, "gradient shape does not match coefficients");
  if (!(divisor > 0)) throw Error(ErrorKind::ShapeMismatch, "update divisor must be positive");
  const double k = step / divisor;
  LinCoeffs out = psi;
  out.M -= (k * scale.m) * grads.M;
  out.gamma -= (k * scale.gamma) * grads.gamma;
  out.b -= (k * scale.b) * grads.b;
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint files.

inline constexpr int kPsiFormatVersion = 1;

struct PsiCheckpoint {
  LinCoeffs psi;
  std::string case_fingerprint;
  int next_iteration = 1;  // first trainer iteration still to run
  int horizon = 0;         // T of the schedule that produced it, 0 if untrained
};

inline nlohmann::json to_json(const PsiCheckpoint& ck) {
  nlohmann::json j;
  j["format"] = "optlin-psi";
  j["version"] = kPsiFormatVersion;
  j["case_fingerprint"] = ck.case_fingerprint;
  j["shape"] = {{"E", ck.psi.M.rows()}, {"N", ck.psi.M.cols()}};
  j["next_iteration"] = ck.next_iteration;
  j["horizon"] = ck.horizon;
  std::vector<double> m;
  m.reserve(static_cast<std::size_t>(ck.psi.M.size()));
  for (Eigen::Index e = 0; e < ck.psi.M.rows(); ++e)
    for (Eigen::Index k = 0; k < ck.psi.M.cols(); ++k) m.push_back(ck.psi.M(e, k));
  j["M"] = m;
  j["gamma"] = std::vector<double>(ck.psi.gamma.data(), ck.psi.gamma.data() + ck.psi.gamma.size());
  j["b"] = std::vector<double>(ck.psi.b.data(), ck.psi.b.data() + ck.psi.b.size());
  return j;
}

inline PsiCheckpoint psi_checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string{}) != "optlin-psi") {
      throw Error(ErrorKind::InvalidConfig, "not an optlin-psi file");
    }
    if (j.at("version").get<int>() != kPsiFormatVersion) {
      throw Error(ErrorKind::InvalidConfig, "unsupported psi format version");
    }
    PsiCheckpoint ck;
    ck.case_fingerprint = j.at("case_fingerprint").get<std::string>();
    ck.next_iteration = j.value("next_iteration", 1);
    ck.horizon = j.value("horizon", 0);
    const auto e = j.at("shape").at("E").get<Eigen::Index>();
    const auto n = j.at("shape").at("N").get<Eigen::Index>();
    const auto m = j.at("M").get<std::vector<double>>();
    const auto g = j.at("gamma").get<std::vector<double>>();
    const auto b = j.at("b").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(m.size()) != e * n || static_cast<Eigen::Index>(g.size()) != e ||
        static_cast<Eigen::Index>(b.size()) != n) {
      throw Error(ErrorKind::ShapeMismatch, "psi arrays do not match the shape header");
    }
    ck.psi = LinCoeffs::zeros(e, n);
    for (Eigen::Index r = 0; r < e; ++r)
      for (Eigen::Index c = 0; c < n; ++c) ck.psi.M(r, c) = m[static_cast<std::size_t>(r * n + c)];
    ck.psi.gamma = Eigen::Map<const VectorXd>(g.data(), e);
    ck.psi.b = Eigen::Map<const VectorXd>(b.data(), n);
    return ck;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::InvalidConfig, std::string("malformed psi file: ") + ex.what());
  }
}

/// Fails with FingerprintMismatch unless the checkpoint was produced for `net`.
inline void require_matching_case(const PsiCheckpoint& ck, const NetworkCase& net) {
  if (ck.case_fingerprint != net.fingerprint()) {
    throw Error(ErrorKind::FingerprintMismatch,
                "checkpoint trained for case " + ck.case_fingerprint + ", got " + net.fingerprint());
  }
  if (ck.psi.M.rows() != Eigen::Index(net.num_branches()) || ck.psi.M.cols() != Eigen::Index(net.num_buses())) {
    throw Error(ErrorKind::FingerprintMismatch, "checkpoint shape does not match case");
  }
}

}  // namespace optlin

#endif  // OPTLIN_LIN_COEFFS_HPP
