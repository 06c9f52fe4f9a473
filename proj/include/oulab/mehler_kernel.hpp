#ifndef OULAB_MEHLER_KERNEL_HPP
#define OULAB_MEHLER_KERNEL_HPP

#include "oulab/gauss_geometry.hpp"
#include "oulab/ou_model.hpp"
#include "oulab/random.hpp"
#include "oulab/report.hpp"

#include <optional>
#include <string>
#include <vector>

namespace oulab {

struct KernelPoint {
  Vector x;
  Vector u;
  double t = 0;
};

/// Time-dependent matrices of the Mehler kernel at one t, plus their time
/// derivatives. Holds a pointer to the model, which must outlive it.
///
///   log K_t(x,u) = a(t) + R(x) - <M_t w, w>/2,   w = u - D_t x,
///   a(t) = (log det Qinf - log det Q_t)/2,       M_t = Q_t^{-1} - Qinf^{-1}.
///
/// Evaluation uses the equivalent form a(t) + R(u) - <Q_t^{-1} v, v>/2 with
/// v = u - e^{tB} x. D_t x grows like e^{t|a|} and would swamp u at large t.
class KernelSlice {
public:
  KernelSlice(const OUModel &model, double t);

  double t() const { return t_; }
  const OUModel &model() const { return *model_; }
  const Matrix &expTB() const { return expTB_; }
  const Matrix &Qt() const { return qt_; }
  const Matrix &QtInv() const { return qtInv_; }
  const Matrix &Dt() const { return dt_; }
  const Matrix &DtInverse() const { return dtInv_; }
  const Matrix &Mt() const { return mt_; }
  double logDetQt() const { return logDetQt_; }

  double logK(const Vector &x, const Vector &u) const;
  /// log of K without the (det Qinf)^{1/2} e^{R(x)} factor.
  double logKTilde(const Vector &x, const Vector &u) const;
  /// d/dt log K_t(x,u), from the closed-form derivatives of a, D_t, M_t.
  double logRate(const Vector &x, const Vector &u) const;
  /// Both at once.
  std::pair<double, double> logKAndRate(const Vector &x,
                                        const Vector &u) const;
  /// R_l(t,x,u) = <Q_t^{-1} e^{tB} (D_{-t} u - x), e_l> for every l.
  Vector rVector(const Vector &x, const Vector &u) const;
  /// d/dt of rVector, via rVector = M_t u - Q_t^{-1} e^{tB} x.
  Vector rVectorRate(const Vector &x, const Vector &u) const;

private:
  const OUModel *model_;
  double t_;
  double a_ = 0, aDot_ = 0, logDetQt_ = 0;
  Matrix expTB_, qt_, qtInv_, dt_, dtInv_, mt_, mtDot_, bExpTB_;
};

/// K_t(x,u), which may overflow for large R(x); see logMehlerK.
double mehlerK(const OUModel &model, const KernelPoint &p);
/// log K_t(x,u). The kernel is positive, so no sign is needed.
double logMehlerK(const OUModel &model, const KernelPoint &p);
double mehlerKTilde(const OUModel &model, const KernelPoint &p);
/// (det Q)^{-1/2} t^{-n/2} exp(-|Q^{-1/2} y|^2 / (2t)).
double convKernel(const OUModel &model, const Vector &y, double t);
/// convKernel times (2 pi)^{-n/2}, a probability density in y.
double normalizedConvKernel(const OUModel &model, const Vector &y, double t);

struct DerivativeEstimate {
  double value = 0;
  double error = 0;
};

/// dK/dt by two-level Richardson extrapolation of central differences of
/// log K with step 1e-4 t.
DerivativeEstimate mehlerKdot(const OUModel &model, const KernelPoint &p);
/// Plain central difference of K with absolute step h.
double centralDifferenceKdot(const OUModel &model, const KernelPoint &p,
                             double h);
/// dK/dt in closed form: K times KernelSlice::logRate.
double mehlerKdotExact(const OUModel &model, const KernelPoint &p);

/// |dK/du_l + K R_l| / max(1, |K R_l|) with a Richardson-extrapolated
/// central difference in u_l. l is zero-based.
double spaceDerivativeIdentityCheck(const OUModel &model, const KernelPoint &p,
                                    Index l);

struct ZeroCount {
  int count = 0;
  int countDoubled = 0;
  bool unstable = false;
  std::vector<double> zeros;
};

/// Sign changes of t -> dK_t/dt on a log-spaced grid. Slices are cached
/// per grid, so one scanner serves many (x,u) pairs.
class ZeroScanner {
public:
  ZeroScanner(const OUModel &model, double tLo = 1e-8, double tHi = 1,
              int gridPoints = 4096);

  /// Count on the base grid and on the doubled grid; zeros refined by
  /// bisection to width 1e-10 when `refine` is set.
  ZeroCount count(const Vector &x, const Vector &u, bool refine = true) const;
  int countOnGrid(const Vector &x, const Vector &u, bool doubled) const;

private:
  std::vector<double> signChangesOnGrid(const Vector &x, const Vector &u,
                                        bool doubled) const;
  double bisect(const Vector &x, const Vector &u, double lo, double hi) const;

  const OUModel *model_;
  double tLo_, tHi_;
  std::vector<KernelSlice> base_;
  std::vector<KernelSlice> fine_;
};

ZeroCount countKdotZeros(const OUModel &model, const Vector &x,
                         const Vector &u, double tLo = 1e-8, double tHi = 1);

struct FtcBound {
  double lhs = 0;        // int_0^1 |dK/dt| dt
  double rhs = 0;        // 2 (sum of K at zeros and endpoints)
  double telescoped = 0; // sum of |K(t_{i+1}) - K(t_i)| over monotone pieces
  double supK = 0;       // max of K over a 1000-point log grid
  ZeroCount zeros;
};

FtcBound ftcVariationBound(const OUModel &model, const Vector &x,
                           const Vector &u);

enum class BoundKind { Litet, DotKeps, DotK1, Ineq100 };
std::string toString(BoundKind kind);
BoundKind parseBoundKind(const std::string &name);

struct CalibrationSpec {
  SampleSpec sample{10000, 1, 3.0};
  /// Fixed candidate rate; unset means search by bisection.
  std::optional<double> rate;
  double tMin = 1e-4;
  double tMax = 50;
};

struct BoundCalibration {
  BoundKind kind = BoundKind::Litet;
  double rate = 0;
  double prefactor = 1;
  double naturalRate = 0;
  double maxRatio = 0;
  double halfSampleRatio = 0;
  bool stable = false;
  CalibrationSpec spec;
  std::string grid;
};

/// Largest c for which the Gaussian factor of the bound can hold: half the
/// infimum over the bound's time range of the smallest eigenvalue of
/// t M_t (small-t bounds) or D_t^T M_t D_t (large-t bound).
double naturalRate(const OUModel &model, BoundKind kind,
                   const CalibrationSpec &spec = {});

/// Ratio of the true quantity to the bound with C = 1. With spec.rate set
/// the ratio is evaluated at that rate and RateTooLarge is thrown if it
/// exceeds naturalRate or is not sample-stable; otherwise c is bisected over
/// (0, naturalRate).
BoundCalibration calibrateBound(const OUModel &model, BoundKind kind,
                                const CalibrationSpec &spec);

/// Calibrates the given bounds; passes when every ratio is finite and
/// within 1.1 of its half-sample value.
ProbeReport kernelBoundsProbe(const OUModel &model,
                              const std::vector<BoundKind> &kinds,
                              const CalibrationSpec &spec);

struct IntegralLemma {
  double lhs = 0;
  double rhs = 0;
  double ratio = 0;
};

/// int_0^1 t^{-p} exp(-delta |u - D_t x|^2 / t) |x|^r dt against
/// |u - x|^{2 - 2p - r}.
IntegralLemma integralLemmaCheck(const OUModel &model,
                                 const PartitionOfUnity &pou, double p,
                                 double r, double delta, const Vector &x,
                                 const Vector &u);

/// int_1^tMax exp(-delta |D_{-t} u - x|^2) |D_{-t} u| dt.
double lemma41Check(const OUModel &model, double delta, const Vector &x,
                    const Vector &u, double tMax = 50);

struct KernelTraceRow {
  double t, k, kdot;
};
std::vector<KernelTraceRow> kernelTrace(const OUModel &model, const Vector &x,
                                        const Vector &u,
                                        const std::vector<double> &times);

} // namespace oulab

#endif // OULAB_MEHLER_KERNEL_HPP
