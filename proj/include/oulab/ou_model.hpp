#ifndef OULAB_OU_MODEL_HPP
#define OULAB_OU_MODEL_HPP

#include "oulab/types.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <string>

namespace oulab {

/// Tolerances used when validating a model. Defaults are the module
/// constants; callers may override them.
struct ModelTolerances {
  double symmetry = 1e-12;
  double lyapunovResidual = 1e-10;
};

/// Immutable Ornstein-Uhlenbeck model: covariance Q, drift B and the
/// quantities derived from them. Build through buildModel().
class OUModel {
public:
  Index dim() const { return q_.rows(); }
  const Matrix &Q() const { return q_; }
  const Matrix &B() const { return b_; }
  const Matrix &Qinf() const { return qinf_; }
  const Matrix &QinfInv() const { return qinfInv_; }
  const Matrix &QinfSqrt() const { return qinfSqrt_; }
  const Matrix &QinfInvSqrt() const { return qinfInvSqrt_; }
  const Matrix &QInv() const { return qInv_; }
  double spectralAbscissa() const { return spectralAbscissa_; }
  double logDetQinf() const { return logDetQinf_; }
  double logDetQ() const { return logDetQ_; }
  /// Residual max|B Qinf + Qinf B^T + Q| of the accepted model.
  double lyapunovResidual() const;

private:
  friend OUModel buildModel(const Matrix &, const Matrix &,
                            const ModelTolerances &);
  OUModel() = default;

  Matrix q_, b_, qinf_, qinfInv_, qinfSqrt_, qinfInvSqrt_, qInv_;
  double spectralAbscissa_ = 0;
  double logDetQinf_ = 0;
  double logDetQ_ = 0;
};

OUModel buildModel(const Matrix &q, const Matrix &b,
                   const ModelTolerances &tol = {});

/// Q = 2, B = -1 in one dimension: Qinf = 1, D_t = e^t.
OUModel standardModel(Index n = 1);

/// e^{tB}.
Matrix expB(const OUModel &model, double t);

/// Q_t = int_0^t e^{sB} Q e^{sB^T} ds. Uses a Taylor series of the
/// Lyapunov operator for t |B| <= 1 and the identity
/// Q_t = Qinf - e^{tB} Qinf e^{tB^T} otherwise.
Matrix covarianceQt(const OUModel &model, double t);

/// Q_t by the closed-form identity only (cancels badly as t -> 0).
Matrix covarianceQtClosedForm(const OUModel &model, double t);

/// Q_t by the Taylor series only.
Matrix covarianceQtSeries(const OUModel &model, double t);

/// D_t = Qinf e^{-t B^T} Qinf^{-1}, a one-parameter group.
Matrix groupDt(const OUModel &model, double t);

/// R(x) = <Qinf^{-1} x, x> / 2.
double quadraticR(const OUModel &model, const Vector &x);

/// |x|_Q = |Qinf^{-1/2} x|.
double normQ(const OUModel &model, const Vector &x);

inline constexpr double kInfiniteTime = std::numeric_limits<double>::infinity();

/// Density of gamma_t (t = kInfiniteTime gives gamma_inf).
double gammaDensity(const OUModel &model, double t, const Vector &x);
double logGammaDensity(const OUModel &model, double t, const Vector &x);

/// A scalar field with optional analytic derivatives. Missing
/// derivatives fall back to central differences.
struct ScalarField {
  std::function<double(const Vector &)> value;
  std::function<Vector(const Vector &)> gradient;
  std::function<Matrix(const Vector &)> hessian;
};

/// L f(x) = tr(Q Hess f(x)) / 2 + <B x, grad f(x)>.
double applyGenerator(const OUModel &model, const ScalarField &f,
                      const Vector &x);

Vector finiteDifferenceGradient(const std::function<double(const Vector &)> &f,
                                const Vector &x, double h);
Matrix finiteDifferenceHessian(const std::function<double(const Vector &)> &f,
                               const Vector &x, double h);

/// Parses {"n": int, "Q": [...], "B": [...]} with row-major matrices.
OUModel modelFromJson(const std::string &text);
OUModel loadModel(const std::string &path);
std::string modelToJson(const OUModel &model);

/// Row-major with 17 significant digits.
std::string formatMatrix(const Matrix &m);

} // namespace oulab

#endif // OULAB_OU_MODEL_HPP
