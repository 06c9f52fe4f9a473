#include "oulab/semigroup_ops.hpp"

#include "oulab/linalg.hpp"
#include "oulab/parallel.hpp"
#include "oulab/random.hpp"
#include "oulab/rho_variation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace oulab {

namespace {

/// exp(logWeight) N(mean, cov): the running result of multiplying a
/// Gaussian density by unnormalised Gaussian factors.
struct WeightedGaussian {
  double logWeight = 0;
  Vector mean;
  Matrix cov;
};

double logDetSpd(const Matrix &m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotSPD, "matrix is not positive definite");
  }
  return 2 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

/// Multiplies by exp(-(u-c)^T S^{-1} (u-c) / 2).
void multiplyFactor(WeightedGaussian &g, const Vector &c, const Matrix &s,
                    double logDetS) {
  const Matrix t = g.cov + s;
  Eigen::LLT<Matrix> llt(t);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotSPD, "Gaussian product covariance not SPD");
  }
  const Vector diff = c - g.mean;
  const Vector sol = llt.solve(diff);
  const double logDetT =
      2 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  g.logWeight += 0.5 * logDetS - 0.5 * logDetT - 0.5 * diff.dot(sol);
  const Matrix gainT = llt.solve(g.cov); // T^{-1} A
  g.mean += g.cov * sol;
  g.cov -= g.cov * gainT;
  g.cov = 0.5 * (g.cov + g.cov.transpose()).eval();
}

Matrix robustFactor(const Matrix &cov) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() == Eigen::Success) {
    return llt.matrixL();
  }
  return linalg::symmetricFunction(
      cov, [](double v) { return std::sqrt(std::max(v, 0.0)); });
}

double expectation(const QuadratureRule &rule, const WeightedGaussian &g,
                   const std::function<double(const Vector &)> &h) {
  return std::exp(g.logWeight) *
         gaussianExpectationFactored(rule, g.mean, robustFactor(g.cov), h);
}

} // namespace

// ------------------------------------------------------------ functions

std::string toString(TestFunctionKind kind) {
  switch (kind) {
  case TestFunctionKind::GaussianBump:
    return "gaussian-bump";
  case TestFunctionKind::IndicatorSmoothed:
    return "indicator-smoothed";
  case TestFunctionKind::PolynomialTimesGaussian:
    return "polynomial-times-gaussian";
  case TestFunctionKind::Custom:
    return "custom";
  }
  return "?";
}

TestFunction TestFunction::constant(const OUModel &model, double c) {
  TestFunction f;
  f.kind_ = TestFunctionKind::Custom;
  f.dim_ = model.dim();
  f.polynomial_ = true;
  f.c0_ = c;
  f.c1_ = Vector::Zero(f.dim_);
  f.c2_ = Matrix::Zero(f.dim_, f.dim_);
  f.l1_ = std::abs(c);
  return f;
}

TestFunction TestFunction::linear(const OUModel &model, const Vector &a) {
  if (a.size() != model.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "coefficient dimension");
  }
  TestFunction f = constant(model, 0);
  f.c1_ = a;
  f.computeL1(model);
  return f;
}

TestFunction TestFunction::polynomialGaussian(const OUModel &model, double c0,
                                              const Vector &c1,
                                              const Matrix &c2,
                                              const GaussianFactor &g) {
  const Index n = model.dim();
  if (c1.size() != n || c2.rows() != n || c2.cols() != n ||
      g.center.size() != n || g.cov.rows() != n || g.cov.cols() != n) {
    throw Error(ErrorCode::DimensionMismatch, "test function dimensions");
  }
  TestFunction f;
  f.kind_ = TestFunctionKind::PolynomialTimesGaussian;
  f.dim_ = n;
  f.polynomial_ = true;
  f.c0_ = c0;
  f.c1_ = c1;
  f.c2_ = c2;
  f.gauss_ = g;
  Eigen::LLT<Matrix> llt(g.cov);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotSPD, "Gaussian factor covariance");
  }
  f.gaussPrecision_ = llt.solve(Matrix::Identity(n, n));
  f.computeL1(model);
  return f;
}

TestFunction TestFunction::gaussianBump(const OUModel &model,
                                        const Vector &center, double width) {
  if (!(width > 0)) {
    throw Error(ErrorCode::InvalidArgument, "bump width must be positive");
  }
  const Index n = model.dim();
  const Matrix s = width * width * Matrix::Identity(n, n);
  TestFunction f = polynomialGaussian(model, 1.0, Vector::Zero(n),
                                      Matrix::Zero(n, n), {center, s});
  // E_inf[g] = (2 pi)^{n/2} det(S)^{1/2} N(0; c, Qinf + S).
  WeightedGaussian wg{0, Vector::Zero(n), model.Qinf()};
  multiplyFactor(wg, center, s, logDetSpd(s));
  f.c0_ = std::exp(-wg.logWeight);
  f.kind_ = TestFunctionKind::GaussianBump;
  f.width_ = width;
  f.l1_ = 1;
  return f;
}

TestFunction TestFunction::smoothedIndicator(const OUModel &model,
                                             const Vector &center,
                                             double radius, double edge) {
  if (!(radius > 0) || !(edge > 0)) {
    throw Error(ErrorCode::InvalidArgument, "radius and edge must be positive");
  }
  ScalarField field;
  field.value = [center, radius, edge](const Vector &u) {
    return 0.5 * std::erfc(((u - center).norm() - radius) /
                           (std::numbers::sqrt2 * edge));
  };
  TestFunction f = custom(model, field);
  f.kind_ = TestFunctionKind::IndicatorSmoothed;
  return f;
}

TestFunction TestFunction::custom(const OUModel &model, ScalarField field) {
  if (!field.value) {
    throw Error(ErrorCode::InvalidArgument, "custom function needs a value");
  }
  TestFunction f;
  f.kind_ = TestFunctionKind::Custom;
  f.dim_ = model.dim();
  f.field_ = std::move(field);
  f.computeL1(model);
  return f;
}

void TestFunction::computeL1(const OUModel &model) {
  const QuadratureRule rule = QuadratureRule::forDimension(dim_);
  WeightedGaussian wg{0, Vector::Zero(dim_), model.Qinf()};
  if (gauss_) {
    multiplyFactor(wg, gauss_->center, gauss_->cov, logDetSpd(gauss_->cov));
  }
  l1_ = expectation(rule, wg, [this](const Vector &u) {
    return std::abs(polynomial_ ? polynomial(u) : field_.value(u));
  });
}

double TestFunction::polynomial(const Vector &u) const {
  return c0_ + c1_.dot(u) + u.dot(c2_ * u);
}

double TestFunction::polynomialMean(const Vector &m, const Matrix &p) const {
  return c0_ + c1_.dot(m) + m.dot(c2_ * m) + (c2_ * p).trace();
}

double TestFunction::operator()(const Vector &u) const {
  if (!polynomial_) {
    return field_.value(u);
  }
  double v = polynomial(u);
  if (gauss_) {
    const Vector d = u - gauss_->center;
    v *= std::exp(-0.5 * d.dot(gaussPrecision_ * d));
  }
  return v;
}

Vector TestFunction::gradient(const Vector &u) const {
  if (!polynomial_) {
    if (field_.gradient) {
      return field_.gradient(u);
    }
    return finiteDifferenceGradient(field_.value, u, 1e-5);
  }
  const Vector gp = c1_ + (c2_ + c2_.transpose()) * u;
  if (!gauss_) {
    return gp;
  }
  const Vector d = u - gauss_->center;
  const Vector pd = gaussPrecision_ * d;
  return std::exp(-0.5 * d.dot(pd)) * (gp - polynomial(u) * pd);
}

Matrix TestFunction::hessian(const Vector &u) const {
  if (!polynomial_) {
    if (field_.hessian) {
      return field_.hessian(u);
    }
    return finiteDifferenceHessian(field_.value, u, 1e-4);
  }
  const Matrix hp = c2_ + c2_.transpose();
  if (!gauss_) {
    return hp;
  }
  const Vector gp = c1_ + hp * u;
  const Vector d = u - gauss_->center;
  const Vector pd = gaussPrecision_ * d;
  const double p = polynomial(u);
  return std::exp(-0.5 * d.dot(pd)) *
         (hp - gp * pd.transpose() - pd * gp.transpose() +
          p * (pd * pd.transpose() - gaussPrecision_));
}

ScalarField TestFunction::field() const {
  ScalarField out;
  out.value = [this](const Vector &u) { return (*this)(u); };
  out.gradient = [this](const Vector &u) { return gradient(u); };
  out.hessian = [this](const Vector &u) { return hessian(u); };
  return out;
}

// ------------------------------------------------------------ grids

TimeGrid::TimeGrid(std::vector<double> points) : points_(std::move(points)) {
  if (points_.empty()) {
    throw Error(ErrorCode::InvalidArgument, "empty time grid");
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!(points_[i] > 0) || !std::isfinite(points_[i]) ||
        (i > 0 && !(points_[i] > points_[i - 1]))) {
      throw Error(ErrorCode::InvalidArgument,
                  "time grid must be positive and strictly increasing");
    }
  }
}

TimeGrid TimeGrid::geometric(double tMin, double tMax, int pointsPerDecade) {
  if (!(tMin > 0) || !(tMax > tMin) || pointsPerDecade < 1) {
    throw Error(ErrorCode::InvalidArgument, "bad geometric grid");
  }
  const double decades = std::log10(tMax / tMin);
  const int steps = std::max(1, static_cast<int>(std::ceil(decades * pointsPerDecade)));
  std::vector<double> pts(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) {
    pts[static_cast<std::size_t>(i)] =
        i == steps ? tMax : tMin * std::pow(tMax / tMin, double(i) / steps);
  }
  return TimeGrid(std::move(pts));
}

TimeGrid TimeGrid::refined() const {
  std::vector<double> pts;
  pts.reserve(2 * points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    pts.push_back(points_[i]);
    if (i + 1 < points_.size()) {
      pts.push_back(std::sqrt(points_[i] * points_[i + 1]));
    }
  }
  return TimeGrid(std::move(pts));
}

const KernelSlice &SliceCache::at(double t) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = slices_.find(t);
  if (it == slices_.end()) {
    it = slices_.emplace(t, std::make_unique<KernelSlice>(*model_, t)).first;
  }
  return *it->second;
}

// ------------------------------------------------------------ semigroup

SemigroupEvaluator::SemigroupEvaluator(const OUModel &model,
                                       QuadratureRule rule, TestFunction f,
                                       const PartitionOfUnity *pou)
    : model_(&model), rule_(rule), f_(std::move(f)), pou_(pou),
      cache_(model) {
  if (f_.dim() != model.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "test function dimension");
  }
}

double SemigroupEvaluator::apply(const Vector &x, double t, OperatorPart part,
                                 SemigroupForm form) const {
  if (!(t > 0)) {
    throw Error(ErrorCode::NonPositiveTime, "t must be positive");
  }
  if (part != OperatorPart::Full && pou_ == nullptr) {
    throw Error(ErrorCode::InvalidArgument,
                "local and global parts need a partition of unity");
  }
  const KernelSlice &slice = cache_.at(t);
  WeightedGaussian wg;
  if (form == SemigroupForm::Kolmogorov) {
    // u = e^{tB} x - y with y ~ gamma_t.
    wg = {0, slice.expTB() * x, slice.Qt()};
  } else {
    // K_t(x, .) is exp(a + R(x)) times a Gaussian factor centred at D_t x
    // with covariance M_t^{-1}; integrate it against gamma_inf.
    const Index n = model_->dim();
    wg = {0, Vector::Zero(n), model_->Qinf()};
    Eigen::LLT<Matrix> mllt(slice.Mt());
    if (mllt.info() != Eigen::Success) {
      throw Error(ErrorCode::NotSPD, "M_t is not positive definite");
    }
    const Matrix s = mllt.solve(Matrix::Identity(n, n));
    const double logDetM =
        2 * mllt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    multiplyFactor(wg, slice.Dt() * x, s, -logDetM);
    wg.logWeight += 0.5 * (model_->logDetQinf() - slice.logDetQt()) +
                    quadraticR(*model_, x);
  }
  if (f_.gaussian()) {
    const auto &g = *f_.gaussian();
    multiplyFactor(wg, g.center, g.cov, logDetSpd(g.cov));
  }
  if (part == OperatorPart::Full && f_.isPolynomial()) {
    return std::exp(wg.logWeight) * f_.polynomialMean(wg.mean, wg.cov);
  }
  const auto rem = [this](const Vector &u) {
    return f_.isPolynomial() ? f_.polynomial(u) : f_(u);
  };
  if (part == OperatorPart::Full) {
    return expectation(rule_, wg, rem);
  }
  const bool local = part == OperatorPart::Local;
  return expectation(rule_, wg, [&](const Vector &u) {
    const double e = pou_->eta(x, u);
    return rem(u) * (local ? e : 1 - e);
  });
}

std::vector<double> SemigroupEvaluator::path(const Vector &x,
                                             const std::vector<double> &times,
                                             OperatorPart part) const {
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) {
    out.push_back(apply(x, t, part));
  }
  return out;
}

ScalarField SemigroupEvaluator::field(double t) const {
  ScalarField out;
  out.value = [this, t](const Vector &x) { return apply(x, t); };
  if (f_.isPolynomial()) {
    // With m = e^{tB} x and u ~ N(m, Q_t), Gaussian integration by parts
    // gives grad_m E f(u) = E[f(u) P (u-m)] and
    // Hess_m E f(u) = E[f(u) (P (u-m)(u-m)^T P - P)], P = Q_t^{-1}. The
    // Gaussian factor of f is absorbed into the sampling density, which
    // leaves polynomials of degree <= 4: a 3-point rule is exact.
    auto tilted = [this, t](const Vector &x) {
      const KernelSlice &s = cache_.at(t);
      WeightedGaussian wg{0, s.expTB() * x, s.Qt()};
      if (f_.gaussian()) {
        multiplyFactor(wg, f_.gaussian()->center, f_.gaussian()->cov,
                       logDetSpd(f_.gaussian()->cov));
      }
      return std::pair{wg, gaussianNodes(3, wg.mean, robustFactor(wg.cov))};
    };
    out.gradient = [this, t, tilted](const Vector &x) {
      const KernelSlice &s = cache_.at(t);
      const Vector m = s.expTB() * x;
      const auto [wg, nodes] = tilted(x);
      Vector g = Vector::Zero(m.size());
      for (const WeightedNode &node : nodes) {
        g += node.weight * f_.polynomial(node.point) * (node.point - m);
      }
      return Vector(s.expTB().transpose() * (s.QtInv() * g) *
                    std::exp(wg.logWeight));
    };
    out.hessian = [this, t, tilted](const Vector &x) {
      const KernelSlice &s = cache_.at(t);
      const Vector m = s.expTB() * x;
      const auto [wg, nodes] = tilted(x);
      const Index n = m.size();
      Matrix h = Matrix::Zero(n, n);
      double mass = 0;
      for (const WeightedNode &node : nodes) {
        const double w = node.weight * f_.polynomial(node.point);
        const Vector y = s.QtInv() * (node.point - m);
        h += w * y * y.transpose();
        mass += w;
      }
      h -= mass * s.QtInv();
      return Matrix(s.expTB().transpose() * h * s.expTB() *
                    std::exp(wg.logWeight));
    };
    return out;
  }
  // grad H_t f(x) = e^{tB^T} E[grad f(u)], u ~ N(e^{tB} x, Q_t).
  out.gradient = [this, t](const Vector &x) {
    const KernelSlice &s = cache_.at(t);
    const Index n = model_->dim();
    const Vector mean = s.expTB() * x;
    Vector g(n);
    for (Index i = 0; i < n; ++i) {
      g(i) = gaussianExpectation(rule_, mean, s.Qt(), [&](const Vector &u) {
        return f_.gradient(u)(i);
      });
    }
    return Vector(s.expTB().transpose() * g);
  };
  out.hessian = [this, t](const Vector &x) {
    const KernelSlice &s = cache_.at(t);
    const Index n = model_->dim();
    const Vector mean = s.expTB() * x;
    Matrix h(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = i; j < n; ++j) {
        h(i, j) = gaussianExpectation(rule_, mean, s.Qt(), [&](const Vector &u) {
          return f_.hessian(u)(i, j);
        });
        h(j, i) = h(i, j);
      }
    }
    return Matrix(s.expTB().transpose() * h * s.expTB());
  };
  return out;
}

double applySemigroup(const OUModel &model, const QuadratureRule &rule,
                      const TestFunction &f, const Vector &x, double t,
                      SemigroupForm form) {
  return SemigroupEvaluator(model, rule, f).apply(x, t, OperatorPart::Full,
                                                  form);
}

LocalGlobal applyLocalGlobal(const OUModel &model,
                             const PartitionOfUnity &pou,
                             const QuadratureRule &rule, const TestFunction &f,
                             const Vector &x, double t) {
  const SemigroupEvaluator eval(model, rule, f, &pou);
  return {eval.apply(x, t, OperatorPart::Local),
          eval.apply(x, t, OperatorPart::Global)};
}

// ------------------------------------------------------------ variation

RefinedVariation refinedVariation(const std::function<double(double)> &phi,
                                  const TimeGrid &grid, double rho,
                                  int maxDoublings, double relTol,
                                  double absTol) {
  const VariationOrder order(rho);
  std::vector<double> ts = grid.points();
  std::vector<double> vs;
  vs.reserve(ts.size());
  for (double t : ts) {
    vs.push_back(phi(t));
  }
  RefinedVariation out;
  out.value = variation(vs, order);
  out.gridPoints = ts.size();
  for (int d = 1; d <= maxDoublings; ++d) {
    std::vector<double> t2, v2;
    t2.reserve(2 * ts.size());
    v2.reserve(2 * ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
      t2.push_back(ts[i]);
      v2.push_back(vs[i]);
      if (i + 1 < ts.size()) {
        const double m = std::sqrt(ts[i] * ts[i + 1]);
        t2.push_back(m);
        v2.push_back(phi(m));
      }
    }
    const double next = variation(v2, order);
    const double change = std::abs(next - out.value);
    ts = std::move(t2);
    vs = std::move(v2);
    out.value = next;
    out.doublings = d;
    out.gridPoints = ts.size();
    if (change <= relTol * std::abs(next) + absTol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

RefinedVariation variationOperator(const SemigroupEvaluator &eval,
                                   const Vector &x, const TimeGrid &grid,
                                   double rho, OperatorPart part,
                                   int maxDoublings) {
  return refinedVariation(
      [&](double t) { return eval.apply(x, t, part); }, grid, rho,
      maxDoublings);
}

double maximalGlobal(const SemigroupEvaluator &eval,
                     const PartitionOfUnity &pou, const Vector &x,
                     const TimeGrid &grid) {
  const OUModel &model = eval.model();
  const TestFunction &f = eval.function();
  if (grid.points().back() > 1) {
    throw Error(ErrorCode::InvalidArgument, "maximal operator grid in (0,1]");
  }
  const Index n = model.dim();
  WeightedGaussian wg{0, Vector::Zero(n), model.Qinf()};
  if (f.gaussian()) {
    multiplyFactor(wg, f.gaussian()->center, f.gaussian()->cov,
                   logDetSpd(f.gaussian()->cov));
  }
  std::vector<const KernelSlice *> slices;
  for (double t : grid.points()) {
    slices.push_back(&eval.slices().at(t));
  }
  return expectation(eval.rule(), wg, [&](const Vector &u) {
    const double outside = 1 - pou.eta(x, u);
    if (outside <= 0) {
      return 0.0;
    }
    double best = -std::numeric_limits<double>::infinity();
    for (const KernelSlice *s : slices) {
      best = std::max(best, s->logK(x, u));
    }
    const double rem = f.isPolynomial() ? f.polynomial(u) : f(u);
    return std::abs(rem) * outside * std::exp(best);
  });
}

// ------------------------------------------------------------ CZ kernels

CzNorm czKernelNorm(const SliceCache &cache, const PartitionOfUnity &pou,
                    const Vector &x, const Vector &u, double rho,
                    const TimeGrid &grid) {
  CzNorm out;
  if ((x - u).norm() == 0) {
    out.value = std::numeric_limits<double>::infinity();
    out.infinite = true;
    out.converged = false;
    return out;
  }
  const double e = pou.eta(x, u);
  if (e == 0) {
    return out;
  }
  const double rx = quadraticR(cache.model(), x);
  const auto r = refinedVariation(
      [&](double t) { return e * std::exp(cache.at(t).logK(x, u) - rx); },
      grid, rho);
  out.value = r.value;
  out.converged = r.converged;
  return out;
}

CzNorm czKernelDifference(const SliceCache &cache,
                          const PartitionOfUnity &pou, const Vector &x,
                          const Vector &u, const Vector &u2, double rho,
                          const TimeGrid &grid) {
  CzNorm out;
  if ((x - u).norm() == 0 || (x - u2).norm() == 0) {
    out.value = std::numeric_limits<double>::infinity();
    out.infinite = true;
    out.converged = false;
    return out;
  }
  const double e1 = pou.eta(x, u), e2 = pou.eta(x, u2);
  const double rx = quadraticR(cache.model(), x);
  const auto r = refinedVariation(
      [&](double t) {
        const KernelSlice &s = cache.at(t);
        return e1 * std::exp(s.logK(x, u) - rx) -
               e2 * std::exp(s.logK(x, u2) - rx);
      },
      grid, rho);
  out.value = r.value;
  out.converged = r.converged;
  return out;
}

namespace {

/// Compass search for a local maximum of f from theta, with per-coordinate
/// initial steps; steps halve whenever no coordinate move improves.
double compassMaximize(const std::function<double(const Vector &)> &f,
                       Vector theta, Vector step, int maxEvaluations) {
  double best = f(theta);
  int evaluations = 1;
  const double floor = 1e-3 * step.maxCoeff();
  while (evaluations < maxEvaluations && step.maxCoeff() > floor) {
    bool improved = false;
    for (Index i = 0; i < theta.size() && evaluations < maxEvaluations; ++i) {
      for (double sign : {1.0, -1.0}) {
        Vector trial = theta;
        trial(i) += sign * step(i);
        const double v = f(trial);
        ++evaluations;
        if (v > best) {
          best = v;
          theta = trial;
          improved = true;
          break;
        }
      }
    }
    if (!improved) {
      step *= 0.5;
    }
  }
  return best;
}

} // namespace

CzSweep czSweep(const OUModel &model, const PartitionOfUnity &pou,
                const CzSweepConfig &config) {
  const Index n = model.dim();
  const double nd = static_cast<double>(n);
  const SliceCache cache(model);
  const TimeGrid grid = TimeGrid::geometric(
      1e-2 * config.minDistance * config.minDistance, 1.0,
      config.pointsPerDecade);
  CzSweep out;
  out.size.claim = "size estimate |x-u|^n ||M(x,u)|| of the local CZ kernel";
  out.size.columns = {"distance", "max_size_ratio"};
  out.smooth.claim =
      "smoothness estimate |x-u|^(n+1) ||M(x,u)-M(x,u')|| / |u-u'| for "
      "|x-u| > 2|u-u'|";
  out.smooth.columns = {"distance", "max_smooth_ratio"};

  // theta = (x, direction of u - x, direction of u' - u, |u'-u| / |u-x|).
  const auto decode = [&](const Vector &theta, double d, Vector &x, Vector &u,
                          Vector &u2, double &h) {
    x = theta.head(n).cwiseMax(-config.radius).cwiseMin(config.radius);
    const Vector dir = theta.segment(n, n);
    const Vector dir2 = theta.segment(2 * n, n);
    if (dir.norm() == 0 || dir2.norm() == 0) {
      return false;
    }
    u = x + d * dir.normalized();
    h = d * std::clamp(theta(3 * n), 0.01, 0.45);
    u2 = u + h * dir2.normalized();
    return true;
  };
  for (int k = 0; k < config.distances; ++k) {
    const double d =
        config.distances == 1
            ? config.minDistance
            : config.minDistance *
                  std::pow(config.maxDistance / config.minDistance,
                           double(k) / (config.distances - 1));
    const auto sizeAt = [&](const Vector &theta) {
      Vector x, u, u2;
      double h;
      if (!decode(theta, d, x, u, u2, h)) {
        return 0.0;
      }
      const CzNorm c = czKernelNorm(cache, pou, x, u, config.rho, grid);
      out.converged = out.converged && c.converged;
      return c.value * std::pow(d, nd);
    };
    const auto smoothAt = [&](const Vector &theta) {
      Vector x, u, u2;
      double h;
      if (!decode(theta, d, x, u, u2, h)) {
        return 0.0;
      }
      const CzNorm c =
          czKernelDifference(cache, pou, x, u, u2, config.rho, grid);
      out.converged = out.converged && c.converged;
      return c.value * std::pow(d, nd + 1) / h;
    };
    std::vector<std::pair<double, Vector>> sizes, smooths;
    for (int i = 0; i < config.samplesPerDistance; ++i) {
      PointStream rng(config.seed,
                      static_cast<std::uint64_t>(k) * 1000003ULL +
                          static_cast<std::uint64_t>(i));
      Vector theta(3 * n + 1);
      theta.head(n) = rng.uniformBox(n, config.radius);
      theta.segment(n, n) = rng.normalVector(n).normalized();
      theta.segment(2 * n, n) = rng.normalVector(n).normalized();
      theta(3 * n) = rng.uniform(0.01, 0.45);
      sizes.emplace_back(sizeAt(theta), theta);
      smooths.emplace_back(smoothAt(theta), theta);
    }
    const auto polish = [&](std::vector<std::pair<double, Vector>> &cands,
                            const std::function<double(const Vector &)> &f) {
      std::sort(cands.begin(), cands.end(),
                [](const auto &a, const auto &b) { return a.first > b.first; });
      double best = cands.empty() ? 0.0 : cands.front().first;
      const std::size_t starts =
          std::min<std::size_t>(cands.size(), config.polishStarts);
      Vector step(3 * n + 1);
      step.head(n).setConstant(0.05 * config.radius);
      step.segment(n, 2 * n).setConstant(0.1);
      step(3 * n) = 0.05;
      for (std::size_t s = 0; s < starts && config.polishEvaluations > 0; ++s) {
        best = std::max(best, compassMaximize(f, cands[s].second, step,
                                              config.polishEvaluations));
      }
      return best;
    };
    const double bestSize = polish(sizes, sizeAt);
    const double bestSmooth = polish(smooths, smoothAt);
    out.size.rows.push_back({d, bestSize});
    out.smooth.rows.push_back({d, bestSmooth});
    out.maxSize = std::max(out.maxSize, bestSize);
    out.maxSmooth = std::max(out.maxSmooth, bestSmooth);
  }
  return out;
}

ProbeReport czProbe(const OUModel &model, const PartitionOfUnity &pou,
                    const CzSweepConfig &config) {
  CzSweepConfig doubled = config;
  doubled.pointsPerDecade *= 2;
  doubled.samplesPerDistance *= 2;
  const CzSweep base = czSweep(model, pou, config);
  const CzSweep fine = czSweep(model, pou, doubled);
  ProbeReport report("cz", "standard estimates of the local variation kernel: "
                           "size |x-u|^-n and smoothness |u-u'| / |x-u|^(n+1)");
  report.setSeed(config.seed);
  report.setInput("rho", config.rho);
  report.setInput("n", static_cast<double>(model.dim()));
  report.setInput("distances", static_cast<double>(config.distances));
  report.setInput("min_distance", config.minDistance);
  report.setInput("max_distance", config.maxDistance);
  report.setInput("samples_per_distance",
                  static_cast<double>(config.samplesPerDistance));
  report.setInput("points_per_decade", static_cast<double>(config.pointsPerDecade));
  report.setInput("polish_starts", static_cast<double>(config.polishStarts));
  report.setInput("polish_evaluations",
                  static_cast<double>(config.polishEvaluations));
  const double sizeDrift =
      std::abs(fine.maxSize - base.maxSize) / std::max(base.maxSize, 1e-300);
  const double smoothDrift = std::abs(fine.maxSmooth - base.maxSmooth) /
                             std::max(base.maxSmooth, 1e-300);
  report.setStatistic("max_size", base.maxSize);
  report.setStatistic("max_size_doubled", fine.maxSize);
  report.setStatistic("size_drift", sizeDrift);
  report.setStatistic("max_smooth", base.maxSmooth);
  report.setStatistic("max_smooth_doubled", fine.maxSmooth);
  report.setStatistic("smooth_drift", smoothDrift);
  if (!base.converged || !fine.converged) {
    report.raise(ProbeFlag::Unconverged);
  }
  report.setPass("finite", std::isfinite(base.maxSize) &&
                               std::isfinite(base.maxSmooth) &&
                               std::isfinite(fine.maxSize) &&
                               std::isfinite(fine.maxSmooth));
  report.setPass("size_drift_within_10pct", sizeDrift <= 0.1);
  report.setPass("smooth_drift_within_10pct", smoothDrift <= 0.1);
  report.addTable("cz_size", base.size);
  report.addTable("cz_smooth", base.smooth);
  return report;
}

// ------------------------------------------------------------ derivatives

double mixedDerivative(const OUModel &model, const KernelPoint &p, Index l) {
  const KernelSlice s(model, p.t);
  const auto [lk, rate] = s.logKAndRate(p.x, p.u);
  return -std::exp(lk) *
         (rate * s.rVector(p.x, p.u)(l) + s.rVectorRate(p.x, p.u)(l));
}

double mixedDerivativeFiniteDifference(const OUModel &model,
                                       const KernelPoint &p, Index l) {
  const auto g = [&](double t) {
    const KernelSlice s(model, t);
    return -std::exp(s.logK(p.x, p.u)) * s.rVector(p.x, p.u)(l);
  };
  const double h = 1e-4 * p.t;
  const double d1 = (g(p.t + h) - g(p.t - h)) / (2 * h);
  const double d2 = (g(p.t + h / 2) - g(p.t - h / 2)) / h;
  return (4 * d2 - d1) / 3;
}

MixedDerivativeBound mixedDerivativeBound(const OUModel &model,
                                          const PartitionOfUnity &pou,
                                          const Vector &x, const Vector &u,
                                          Index l, int panels) {
  const double d = (u - x).norm();
  if (d == 0) {
    throw Error(ErrorCode::Coincident, "x = u");
  }
  if (pou.eta(x, u) == 0) {
    throw Error(ErrorCode::EtaZero, "eta(x,u) = 0");
  }
  if (l < 0 || l >= model.dim()) {
    throw Error(ErrorCode::InvalidArgument, "coordinate index out of range");
  }
  const double rx = quadraticR(model, x);
  const auto g = [&](double s) {
    const double t = std::exp(s);
    const KernelSlice sl(model, t);
    const auto [lk, rate] = sl.logKAndRate(x, u);
    const double inner =
        rate * sl.rVector(x, u)(l) + sl.rVectorRate(x, u)(l);
    return std::exp(lk - rx) * std::abs(inner) * t;
  };
  const double lo = std::log(1e-4 * d * d);
  const double scale = std::pow(d, static_cast<double>(model.dim()) + 1);
  MixedDerivativeBound out;
  out.integral = integrateSimpson(g, lo, 0.0, panels);
  out.ratio = out.integral * scale;
  out.ratioDoubled = integrateSimpson(g, lo, 0.0, 2 * panels) * scale;
  out.stable = std::abs(out.ratioDoubled - out.ratio) <= 0.1 * out.ratioDoubled;
  return out;
}

// ------------------------------------------------------------ probes

std::string toString(WeakTypeRegime regime) {
  switch (regime) {
  case WeakTypeRegime::Full:
    return "full";
  case WeakTypeRegime::LargeTime:
    return "large-t";
  case WeakTypeRegime::GlobalSmallTime:
    return "global-small-t";
  case WeakTypeRegime::LocalSmallTime:
    return "local-small-t";
  }
  return "?";
}

WeakTypeRegime parseRegime(const std::string &name) {
  for (auto r : {WeakTypeRegime::Full, WeakTypeRegime::LargeTime,
                 WeakTypeRegime::GlobalSmallTime,
                 WeakTypeRegime::LocalSmallTime}) {
    if (toString(r) == name) {
      return r;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown regime " + name);
}

WeakTypeStatistic weakTypeStatistic(std::vector<double> values,
                                    bool logWeight,
                                    std::size_t minExceedances) {
  std::sort(values.begin(), values.end(), std::greater<>());
  const double m = static_cast<double>(values.size());
  WeakTypeStatistic out;
  for (std::size_t k = std::max<std::size_t>(minExceedances, 1);
       k <= values.size(); ++k) {
    const double a = values[k - 1];
    if (!(a > 0) || (logWeight && !(a > 1))) {
      break;
    }
    const double w = logWeight ? a * std::sqrt(std::log(a)) : a;
    const double lam = static_cast<double>(k) / m;
    if (w * lam > out.value) {
      out.value = w * lam;
      out.alpha = a;
      out.lambda = lam;
      out.ciWidth = 2 * 1.96 * w * std::sqrt(lam * (1 - lam) / m);
    }
  }
  return out;
}

double largeTimeHorizon(const OUModel &model) {
  return std::min(200.0, 1 + 30 / -model.spectralAbscissa());
}

namespace {

std::string regimeClaim(WeakTypeRegime r) {
  switch (r) {
  case WeakTypeRegime::Full:
    return "weak type (1,1) of the rho-variation of H_t over t > 0";
  case WeakTypeRegime::LargeTime:
    return "gamma_inf{V > alpha} <= C / (alpha sqrt(log alpha)) for the "
           "variation over t >= 1";
  case WeakTypeRegime::GlobalSmallTime:
    return "weak type (1,1) of the variation of the global part over (0,1]";
  case WeakTypeRegime::LocalSmallTime:
    return "weak type (1,1) of the variation of the local part over (0,1]";
  }
  return "";
}

} // namespace

ProbeReport weakTypeProbe(const OUModel &model, const PartitionOfUnity &pou,
                          const QuadratureRule &rule,
                          const WeakTypeConfig &config) {
  const bool needsRho = config.regime == WeakTypeRegime::Full ||
                        config.regime == WeakTypeRegime::LocalSmallTime;
  if (needsRho && !(config.rho > 2)) {
    throw Error(ErrorCode::InvalidArgument, "this regime needs rho > 2");
  }
  if (config.sampleSize < 1000) {
    throw Error(ErrorCode::InvalidArgument, "weak-type probe needs >= 1000 samples");
  }
  const Index n = model.dim();
  // For t >= 1 a bump at the origin keeps H_t f below ~1, so the large-t
  // regime puts its mass off-centre where the kernel can grow.
  Vector center = Vector::Zero(n);
  if (config.bumpCenter) {
    center = *config.bumpCenter;
  } else if (config.regime == WeakTypeRegime::LargeTime) {
    center = 2.5 * model.QinfSqrt().col(0);
  }
  if (center.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "bump center dimension");
  }
  const TestFunction f =
      TestFunction::gaussianBump(model, center, config.bumpWidth);
  const SemigroupEvaluator eval(model, rule, f, &pou);

  const double tMin = std::min(1e-6, 1e-4 * config.bumpWidth * config.bumpWidth);
  const double horizon = largeTimeHorizon(model);
  OperatorPart part = OperatorPart::Full;
  double lo = tMin, hi = horizon;
  switch (config.regime) {
  case WeakTypeRegime::Full:
    break;
  case WeakTypeRegime::LargeTime:
    lo = 1;
    break;
  case WeakTypeRegime::GlobalSmallTime:
    hi = 1;
    part = OperatorPart::Global;
    break;
  case WeakTypeRegime::LocalSmallTime:
    hi = 1;
    part = OperatorPart::Local;
    break;
  }
  const TimeGrid grid = TimeGrid::geometric(lo, hi, config.pointsPerDecade);

  std::vector<double> values(config.sampleSize);
  std::vector<char> converged(config.sampleSize);
  parallelFor(config.sampleSize, [&](std::size_t i) {
    PointStream rng(config.seed, i);
    const Vector x = model.QinfSqrt() * rng.normalVector(n);
    const RefinedVariation v = variationOperator(eval, x, grid, config.rho,
                                                 part, config.maxDoublings);
    values[i] = v.value;
    converged[i] = v.converged;
  });
  const auto unconverged = static_cast<std::size_t>(
      std::count(converged.begin(), converged.end(), 0));
  const bool logWeight = config.regime == WeakTypeRegime::LargeTime;
  const WeakTypeStatistic full =
      weakTypeStatistic(values, logWeight, config.minExceedances);
  const WeakTypeStatistic half = weakTypeStatistic(
      {values.begin(), values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2)},
      logWeight, config.minExceedances);

  ProbeReport report("weak_type", regimeClaim(config.regime));
  report.setSeed(config.seed);
  report.setInput("regime", toString(config.regime));
  report.setInput("rho", config.rho);
  report.setInput("delta", config.bumpWidth);
  report.setInput("samples", static_cast<double>(config.sampleSize));
  report.setInput("points_per_decade", static_cast<double>(config.pointsPerDecade));
  report.setInput("t_min", lo);
  report.setInput("t_max", hi);
  report.setInput("min_exceedances", static_cast<double>(config.minExceedances));
  report.setInput("center", formatMatrix(center.transpose()));
  report.setInput("weight", logWeight ? "alpha*sqrt(log alpha)" : "alpha");
  report.setStatistic("statistic", full.value);
  report.setStatistic("statistic_half", half.value);
  report.setStatistic("alpha_star", full.alpha);
  report.setStatistic("lambda_star", full.lambda);
  report.setStatistic("unconverged", static_cast<double>(unconverged));
  report.setStatistic("max_variation",
                      *std::max_element(values.begin(), values.end()));
  report.setCiWidth("statistic", full.ciWidth);
  if (unconverged > 0) {
    report.raise(ProbeFlag::Unconverged);
  }
  report.setPass("finite", std::isfinite(full.value));
  report.setPass("half_sample_stable", full.value <= 1.1 * half.value);

  Table curve;
  curve.claim = regimeClaim(config.regime);
  curve.columns = {"alpha", "lambda", "alpha_lambda"};
  if (logWeight) {
    curve.columns.push_back("alpha_sqrtlog_lambda");
  }
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const double vmax = sorted.back();
  const auto positive = std::upper_bound(sorted.begin(), sorted.end(), 0.0);
  if (positive != sorted.end() && vmax > *positive) {
    const double vmin = *positive;
    for (int k = 0; k < 60; ++k) {
      const double a = vmin * std::pow(vmax / vmin, k / 59.0);
      const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), a);
      const double lam = static_cast<double>(above) / static_cast<double>(sorted.size());
      std::vector<double> row{a, lam, a * lam};
      if (logWeight) {
        row.push_back(a > 1 ? a * std::sqrt(std::log(a)) * lam : 0.0);
      }
      curve.rows.push_back(row);
    }
  }
  report.addTable("alpha_lambda", std::move(curve));
  return report;
}

ProbeReport enhancedLemmaProbe(const OUModel &model, const TestFunction &f,
                               const EnhancedConfig &config) {
  for (double a : config.alphas) {
    if (!(a > 2)) {
      throw Error(ErrorCode::AlphaTooSmall, "alpha must exceed 2");
    }
  }
  if (!(config.delta > 0)) {
    throw Error(ErrorCode::InvalidArgument, "delta must be positive");
  }
  const Index n = model.dim();
  const QuadratureRule rule = QuadratureRule::forDimension(n);
  WeightedGaussian wg{0, Vector::Zero(n), model.Qinf()};
  if (f.gaussian()) {
    multiplyFactor(wg, f.gaussian()->center, f.gaussian()->cov,
                   logDetSpd(f.gaussian()->cov));
  }
  std::vector<WeightedNode> nodes =
      gaussianNodes(rule.order, wg.mean, robustFactor(wg.cov));
  for (auto &node : nodes) {
    const double rem =
        f.isPolynomial() ? f.polynomial(node.point) : f(node.point);
    node.weight *= std::exp(wg.logWeight) * std::abs(rem);
  }

  ProbeReport report("enhanced",
                     "gamma_inf{x in C_alpha : e^{R(x)} int exp(-delta "
                     "|x~-u~|^2) |f| dgamma > alpha} <= C/(alpha sqrt(log alpha))");
  report.setSeed(config.seed);
  report.setInput("delta", config.delta);
  report.setInput("samples", static_cast<double>(config.sampleSize));
  report.setInput("function", toString(f.kind()));
  Table table;
  table.claim = report.claim();
  table.columns = {"alpha", "measure", "statistic"};
  bool finite = true;
  for (double alpha : config.alphas) {
    const double beta = std::log(alpha);
    std::vector<std::pair<Vector, double>> projected;
    for (const auto &node : nodes) {
      if (node.weight > 0 && node.point.norm() > 0) {
        projected.emplace_back(polarDecompose(model, node.point, beta).xTilde,
                               node.weight);
      }
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < config.sampleSize; ++i) {
      PointStream rng(config.seed, i);
      const Vector x = model.QinfSqrt() * rng.normalVector(n);
      if (!annulusCAlpha(model, alpha, x)) {
        continue;
      }
      const Vector xt = polarDecompose(model, x, beta).xTilde;
      double integral = 0;
      for (const auto &[ut, w] : projected) {
        integral += w * std::exp(-config.delta * (xt - ut).squaredNorm());
      }
      if (std::exp(quadraticR(model, x)) * integral > alpha) {
        ++hits;
      }
    }
    const double m = static_cast<double>(config.sampleSize);
    const double measure = static_cast<double>(hits) / m;
    const double weight = alpha * std::sqrt(std::log(alpha));
    const std::string key = "alpha_" + formatDouble(alpha);
    report.setStatistic(key + "_measure", measure);
    report.setStatistic(key + "_statistic", weight * measure);
    report.setCiWidth(key + "_statistic",
                      2 * 1.96 * weight * std::sqrt(measure * (1 - measure) / m));
    finite = finite && std::isfinite(weight * measure);
    table.rows.push_back({alpha, measure, weight * measure});
  }
  report.addTable("enhanced", std::move(table));
  report.setPass("finite", finite);
  return report;
}

} // namespace oulab
