#ifndef OPTLIN_ERRORS_HPP
#define OPTLIN_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace optlin {

enum class ErrorKind {
  MissingBlock,
  MalformedRow,
  NonPositiveTap,
  ZeroReactance,
  InvalidCase,
  UnsupportedCost,
  ShapeMismatch,
  Infeasible,
  Unbounded,
  MaxIterations,
  NonConvergence,
  SingularJacobian,
  SingularGamma,
  AllScenariosDegenerate,
  FingerprintMismatch,
  InvalidConfig,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MissingBlock: return "MissingBlock";
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::NonPositiveTap: return "NonPositiveTap";
    case ErrorKind::ZeroReactance: return "ZeroReactance";
    case ErrorKind::InvalidCase: return "InvalidCase";
    case ErrorKind::UnsupportedCost: return "UnsupportedCost";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::Unbounded: return "Unbounded";
    case ErrorKind::MaxIterations: return "MaxIterations";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::SingularJacobian: return "SingularJacobian";
    case ErrorKind::SingularGamma: return "SingularGamma";
    case ErrorKind::AllScenariosDegenerate: return "AllScenariosDegenerate";
    case ErrorKind::FingerprintMismatch: return "FingerprintMismatch";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace optlin

#endif  // OPTLIN_ERRORS_HPP
