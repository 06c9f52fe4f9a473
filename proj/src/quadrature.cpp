#include "oulab/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <map>
#include <mutex>

namespace oulab {

namespace {

GaussHermite1D computeGaussHermite(int order) {
  // Jacobi matrix of the monic probabilists' Hermite recurrence.
  Matrix jacobi = Matrix::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(jacobi);
  GaussHermite1D rule;
  rule.nodes.resize(static_cast<size_t>(order));
  rule.weights.resize(static_cast<size_t>(order));
  double total = 0;
  for (int i = 0; i < order; ++i) {
    rule.nodes[static_cast<size_t>(i)] = es.eigenvalues()(i);
    const double v = es.eigenvectors()(0, i);
    rule.weights[static_cast<size_t>(i)] = v * v;
    total += v * v;
  }
  for (auto &w : rule.weights) {
    w /= total;
  }
  // Symmetrise nodes to remove eigensolver noise.
  for (int i = 0; i < order / 2; ++i) {
    const auto lo = static_cast<size_t>(i);
    const auto hi = static_cast<size_t>(order - 1 - i);
    const double x = 0.5 * (rule.nodes[hi] - rule.nodes[lo]);
    const double w = 0.5 * (rule.weights[hi] + rule.weights[lo]);
    rule.nodes[lo] = -x;
    rule.nodes[hi] = x;
    rule.weights[lo] = rule.weights[hi] = w;
  }
  if (order % 2 == 1) {
    rule.nodes[static_cast<size_t>(order / 2)] = 0;
  }
  return rule;
}

double adaptiveNd(const QuadratureRule &rule, const Vector &mean,
                  const Matrix &factor,
                  const std::function<double(const Vector &)> &g, Vector &z,
                  Index axis, long &evals) {
  const Index n = mean.size();
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  auto inner = [&](double zi) {
    z(axis) = zi;
    const double w = kInvSqrt2Pi * std::exp(-0.5 * zi * zi);
    if (axis + 1 == n) {
      ++evals;
      if (evals > rule.budget) {
        throw Error(ErrorCode::QuadratureBudgetExceeded,
                    "adaptive quadrature exceeded its evaluation budget");
      }
      return w * g(mean + factor * z);
    }
    Vector zcopy = z;
    return w * adaptiveNd(rule, mean, factor, g, zcopy, axis + 1, evals);
  };
  double err = 0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      inner, -12.0, 12.0, 25, rule.targetAccuracy, &err);
}

} // namespace

const GaussHermite1D &gaussHermite(int order) {
  static std::mutex mutex;
  static std::map<int, GaussHermite1D> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(order);
  if (it == cache.end()) {
    if (order < 1 || order > 400) {
      throw Error(ErrorCode::InvalidArgument, "Gauss-Hermite order out of range");
    }
    it = cache.emplace(order, computeGaussHermite(order)).first;
  }
  return it->second;
}

QuadratureRule QuadratureRule::forDimension(Index n) {
  QuadratureRule r;
  r.order = n <= 2 ? 64 : (n == 3 ? 32 : 16);
  return r;
}

double gaussianExpectationFactored(
    const QuadratureRule &rule, const Vector &mean, const Matrix &factor,
    const std::function<double(const Vector &)> &g) {
  const Index n = mean.size();
  if (rule.kind == QuadratureKind::Adaptive) {
    if (n > 2) {
      throw Error(ErrorCode::InvalidArgument,
                  "adaptive Gaussian quadrature supports n <= 2 only");
    }
    Vector z = Vector::Zero(n);
    long evals = 0;
    return adaptiveNd(rule, mean, factor, g, z, 0, evals);
  }
  const GaussHermite1D &gh = gaussHermite(rule.order);
  const auto order = static_cast<Index>(gh.nodes.size());
  std::vector<Index> idx(static_cast<size_t>(n), 0);
  Vector z(n);
  double total = 0;
  while (true) {
    double w = 1;
    for (Index i = 0; i < n; ++i) {
      z(i) = gh.nodes[static_cast<size_t>(idx[static_cast<size_t>(i)])];
      w *= gh.weights[static_cast<size_t>(idx[static_cast<size_t>(i)])];
    }
    total += w * g(mean + factor * z);
    Index axis = 0;
    while (axis < n && ++idx[static_cast<size_t>(axis)] == order) {
      idx[static_cast<size_t>(axis)] = 0;
      ++axis;
    }
    if (axis == n) {
      break;
    }
  }
  return total;
}

std::vector<WeightedNode> gaussianNodes(int order, const Vector &mean,
                                        const Matrix &factor) {
  std::vector<WeightedNode> out;
  QuadratureRule rule;
  rule.order = order;
  // Reuse the tensor loop; the integrand records each node.
  gaussianExpectationFactored(rule, Vector::Zero(mean.size()),
                              Matrix::Identity(mean.size(), mean.size()),
                              [&](const Vector &z) {
                                out.push_back({mean + factor * z, 0.0});
                                return 0.0;
                              });
  const GaussHermite1D &gh = gaussHermite(order);
  const auto m = gh.nodes.size();
  for (std::size_t k = 0; k < out.size(); ++k) {
    double w = 1;
    std::size_t rest = k;
    for (Index i = 0; i < mean.size(); ++i) {
      w *= gh.weights[rest % m];
      rest /= m;
    }
    out[k].weight = w;
  }
  return out;
}

double gaussianExpectation(const QuadratureRule &rule, const Vector &mean,
                           const Matrix &cov,
                           const std::function<double(const Vector &)> &g) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotSPD, "covariance is not positive definite");
  }
  return gaussianExpectationFactored(rule, mean, llt.matrixL(), g);
}

Integral1D integrateAdaptive(const std::function<double(double)> &f, double a,
                             double b, double relTol, unsigned maxDepth) {
  Integral1D out;
  out.value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, a, b, maxDepth, relTol, &out.errorEstimate);
  return out;
}

double integrateSimpson(const std::function<double(double)> &f, double a,
                        double b, int panels) {
  if (panels % 2 == 1) {
    ++panels;
  }
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) {
    s += (i % 2 == 1 ? 4.0 : 2.0) * f(a + i * h);
  }
  return s * h / 3;
}

} // namespace oulab
