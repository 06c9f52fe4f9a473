#ifndef OULAB_SEMIGROUP_OPS_HPP
#define OULAB_SEMIGROUP_OPS_HPP

#include "oulab/gauss_geometry.hpp"
#include "oulab/mehler_kernel.hpp"
#include "oulab/quadrature.hpp"
#include "oulab/report.hpp"

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace oulab {

/// exp(-(u-c)^T cov^{-1} (u-c) / 2), unnormalised.
struct GaussianFactor {
  Vector center;
  Matrix cov;
};

enum class TestFunctionKind {
  GaussianBump,
  IndicatorSmoothed,
  PolynomialTimesGaussian,
  Custom
};
std::string toString(TestFunctionKind kind);

/// f(u) = p(u) g(u) with p(u) = c0 + c1.u + u.C2 u and g an optional
/// Gaussian factor, or an arbitrary scalar field. The polynomial form is
/// integrated exactly against Gaussians; the field form by quadrature.
class TestFunction {
public:
  static TestFunction constant(const OUModel &model, double c);
  static TestFunction linear(const OUModel &model, const Vector &a);
  /// Normalised to unit L1(gamma_inf) norm.
  static TestFunction gaussianBump(const OUModel &model, const Vector &center,
                                   double width);
  static TestFunction polynomialGaussian(const OUModel &model, double c0,
                                         const Vector &c1, const Matrix &c2,
                                         const GaussianFactor &g);
  /// Indicator of the Euclidean ball, edges smoothed by erfc at `edge`.
  static TestFunction smoothedIndicator(const OUModel &model,
                                        const Vector &center, double radius,
                                        double edge);
  static TestFunction custom(const OUModel &model, ScalarField field);

  TestFunctionKind kind() const { return kind_; }
  Index dim() const { return dim_; }
  double operator()(const Vector &u) const;
  Vector gradient(const Vector &u) const;
  Matrix hessian(const Vector &u) const;
  ScalarField field() const;

  bool isPolynomial() const { return polynomial_; }
  const std::optional<GaussianFactor> &gaussian() const { return gauss_; }
  /// p(u), the factor in front of the Gaussian (polynomial forms only).
  double polynomial(const Vector &u) const;
  /// E[p(U)] for U ~ N(m, P).
  double polynomialMean(const Vector &m, const Matrix &p) const;
  double l1Norm() const { return l1_; }
  /// Bump width (0 for other kinds).
  double width() const { return width_; }

private:
  TestFunction() = default;
  void computeL1(const OUModel &model);

  TestFunctionKind kind_ = TestFunctionKind::Custom;
  Index dim_ = 0;
  bool polynomial_ = false;
  double c0_ = 0;
  Vector c1_;
  Matrix c2_;
  std::optional<GaussianFactor> gauss_;
  Matrix gaussPrecision_;
  ScalarField field_;
  double l1_ = 0;
  double width_ = 0;
};

/// Strictly increasing time grid.
class TimeGrid {
public:
  explicit TimeGrid(std::vector<double> points);
  /// pointsPerDecade geometric points from tMin to tMax, both included.
  static TimeGrid geometric(double tMin, double tMax, int pointsPerDecade);

  const std::vector<double> &points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  /// Adds the geometric midpoint of every gap, so the grid is a superset.
  TimeGrid refined() const;

private:
  std::vector<double> points_;
};

/// Kernel slices keyed by t, shared across evaluation points.
class SliceCache {
public:
  explicit SliceCache(const OUModel &model) : model_(&model) {}
  const KernelSlice &at(double t) const;
  const OUModel &model() const { return *model_; }

private:
  const OUModel *model_;
  mutable std::mutex mutex_;
  mutable std::map<double, std::unique_ptr<KernelSlice>> slices_;
};

enum class SemigroupForm { Kernel, Kolmogorov };
enum class OperatorPart { Full, Local, Global };

/// H_t f(x) and its local/global parts for one test function.
class SemigroupEvaluator {
public:
  SemigroupEvaluator(const OUModel &model, QuadratureRule rule,
                     TestFunction f, const PartitionOfUnity *pou = nullptr);

  double apply(const Vector &x, double t,
               OperatorPart part = OperatorPart::Full,
               SemigroupForm form = SemigroupForm::Kolmogorov) const;
  std::vector<double> path(const Vector &x, const std::vector<double> &times,
                           OperatorPart part = OperatorPart::Full) const;
  /// x -> H_t f(x) with derivatives from differentiating under the integral.
  ScalarField field(double t) const;

  const OUModel &model() const { return *model_; }
  const TestFunction &function() const { return f_; }
  const QuadratureRule &rule() const { return rule_; }
  const SliceCache &slices() const { return cache_; }

private:
  const OUModel *model_;
  QuadratureRule rule_;
  TestFunction f_;
  const PartitionOfUnity *pou_;
  SliceCache cache_;
};

double applySemigroup(const OUModel &model, const QuadratureRule &rule,
                      const TestFunction &f, const Vector &x, double t,
                      SemigroupForm form = SemigroupForm::Kolmogorov);

struct LocalGlobal {
  double local = 0;
  double global = 0;
};
LocalGlobal applyLocalGlobal(const OUModel &model,
                             const PartitionOfUnity &pou,
                             const QuadratureRule &rule, const TestFunction &f,
                             const Vector &x, double t);

struct RefinedVariation {
  double value = 0;
  bool converged = false;
  int doublings = 0;
  std::size_t gridPoints = 0;
};

/// v(rho) of phi on the grid, doubled until the relative change is below
/// relTol (plus an absolute floor) or maxDoublings is reached.
RefinedVariation refinedVariation(const std::function<double(double)> &phi,
                                  const TimeGrid &grid, double rho,
                                  int maxDoublings = 3, double relTol = 1e-3,
                                  double absTol = 1e-12);

RefinedVariation variationOperator(const SemigroupEvaluator &eval,
                                   const Vector &x, const TimeGrid &grid,
                                   double rho,
                                   OperatorPart part = OperatorPart::Full,
                                   int maxDoublings = 3);

/// int max_t K_t(x,u) (1 - eta(x,u)) |f(u)| dgamma_inf(u), the max taken
/// over the grid pointwise in u.
double maximalGlobal(const SemigroupEvaluator &eval,
                     const PartitionOfUnity &pou, const Vector &x,
                     const TimeGrid &grid);

struct CzNorm {
  double value = 0;
  bool converged = true;
  bool infinite = false;
};

/// e^{-R(x)} eta(x,u) v(rho) of t -> K_t(x,u) on a grid within (0,1].
CzNorm czKernelNorm(const SliceCache &cache, const PartitionOfUnity &pou,
                    const Vector &x, const Vector &u, double rho,
                    const TimeGrid &grid);
/// Same for t -> eta(x,u) K_t(x,u) - eta(x,u') K_t(x,u').
CzNorm czKernelDifference(const SliceCache &cache,
                          const PartitionOfUnity &pou, const Vector &x,
                          const Vector &u, const Vector &u2, double rho,
                          const TimeGrid &grid);

struct CzSweepConfig {
  double rho = 3;
  int distances = 12;
  double minDistance = 1e-3;
  double maxDistance = 0.4;
  int samplesPerDistance = 40;
  double radius = 2;
  int pointsPerDecade = 64;
  std::uint64_t seed = 1;
  /// The best sampled points are refined by compass search, which makes
  /// the sup far less sensitive to the sample size.
  std::size_t polishStarts = 3;
  int polishEvaluations = 300;
};

struct CzSweep {
  double maxSize = 0;     // max |x-u|^n ||M(x,u)||
  double maxSmooth = 0;   // max |x-u|^{n+1} ||M(x,u)-M(x,u')|| / |u-u'|
  bool converged = true;
  Table size;
  Table smooth;
};

CzSweep czSweep(const OUModel &model, const PartitionOfUnity &pou,
                const CzSweepConfig &config);

/// Sweep at the configured resolution and with both the time grid and the
/// sample doubled; passes when the sups are finite and drift <= 10%.
ProbeReport czProbe(const OUModel &model, const PartitionOfUnity &pou,
                    const CzSweepConfig &config);

/// d/dt d/du_l K_t(x,u) = -K (dlogK/dt R_l + dR_l/dt).
double mixedDerivative(const OUModel &model, const KernelPoint &p, Index l);
/// Central difference in t of -K R_l, Richardson extrapolated.
double mixedDerivativeFiniteDifference(const OUModel &model,
                                       const KernelPoint &p, Index l);

struct MixedDerivativeBound {
  double integral = 0;      // e^{-R(x)} int_0^1 |d_t d_ul K| dt
  double ratio = 0;         // integral |u-x|^{n+1}
  double ratioDoubled = 0;  // same with twice the panels
  bool stable = false;      // within 10%
};

MixedDerivativeBound mixedDerivativeBound(const OUModel &model,
                                          const PartitionOfUnity &pou,
                                          const Vector &x, const Vector &u,
                                          Index l, int panels = 400);

enum class WeakTypeRegime { Full, LargeTime, GlobalSmallTime, LocalSmallTime };
std::string toString(WeakTypeRegime regime);
WeakTypeRegime parseRegime(const std::string &name);

struct WeakTypeConfig {
  double rho = 3;
  WeakTypeRegime regime = WeakTypeRegime::Full;
  double bumpWidth = 0.05;
  /// Origin when unset; 2.5 Qinf^{1/2} e_1 for the large-t regime.
  std::optional<Vector> bumpCenter;
  std::size_t sampleSize = 4000;
  std::uint64_t seed = 1;
  int pointsPerDecade = 64;
  int maxDoublings = 3;
  /// Thresholds alpha need at least this many exceedances.
  std::size_t minExceedances = 10;
};

struct WeakTypeStatistic {
  double value = 0;
  double alpha = 0;
  double lambda = 0;
  double ciWidth = 0;
};

/// sup over alpha of w(alpha) lambda(alpha) from the order statistics of
/// the sample, w(alpha) = alpha or alpha sqrt(log alpha) (alpha > 1).
WeakTypeStatistic weakTypeStatistic(std::vector<double> values,
                                    bool logWeight,
                                    std::size_t minExceedances);

/// Largest time of the large-t grids: the remaining variation decays like
/// e^{a t} with a the spectral abscissa.
double largeTimeHorizon(const OUModel &model);

ProbeReport weakTypeProbe(const OUModel &model, const PartitionOfUnity &pou,
                          const QuadratureRule &rule,
                          const WeakTypeConfig &config);

struct EnhancedConfig {
  double delta = 1;
  std::vector<double> alphas{10, 100, 1000};
  std::size_t sampleSize = 4000;
  std::uint64_t seed = 1;
};

ProbeReport enhancedLemmaProbe(const OUModel &model, const TestFunction &f,
                               const EnhancedConfig &config);

} // namespace oulab

#endif // OULAB_SEMIGROUP_OPS_HPP
