#ifndef OULAB_TYPES_HPP
#define OULAB_TYPES_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace oulab {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ErrorCode {
  NotSPD,
  NotStable,
  DimensionMismatch,
  NonFinite,
  NonPositiveTime,
  StepUnderflow,
  EmptyPath,
  BadOrder,
  TooLong,
  BadSplit,
  ZeroPoint,
  BracketFail,
  AlphaTooSmall,
  EtaZero,
  Coincident,
  TailNotConverged,
  RateTooLarge,
  QuadratureBudgetExceeded,
  CostGuard,
  InvalidArgument,
  Io,
  Parse,
};

const char *toString(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(std::string(toString(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

template <typename Derived>
bool allFinite(const Eigen::DenseBase<Derived> &m) {
  return m.derived().array().isFinite().all();
}

} // namespace oulab

#endif // OULAB_TYPES_HPP
