#ifndef OULAB_QUADRATURE_HPP
#define OULAB_QUADRATURE_HPP

#include "oulab/types.hpp"

#include <functional>
#include <vector>

namespace oulab {

/// Probabilists' Gauss-Hermite nodes and weights (weight function the
/// standard normal density), computed by Golub-Welsch.
struct GaussHermite1D {
  std::vector<double> nodes;
  std::vector<double> weights;
};

const GaussHermite1D &gaussHermite(int order);

enum class QuadratureKind { GaussHermiteTensor, Adaptive };

/// How Gaussian-measure integrals are discretised. Adaptive is only
/// supported for n <= 2.
struct QuadratureRule {
  QuadratureKind kind = QuadratureKind::GaussHermiteTensor;
  int order = 64;
  double targetAccuracy = 1e-10;
  /// Function-evaluation budget for the adaptive kind.
  long budget = 2'000'000;

  /// Defaults: order 64 per axis for n <= 2, 32 for n = 3, 16 beyond.
  static QuadratureRule forDimension(Index n);
};

/// E[g(U)] for U ~ N(mean, cov).
double gaussianExpectation(const QuadratureRule &rule, const Vector &mean,
                           const Matrix &cov,
                           const std::function<double(const Vector &)> &g);

/// Same, with the square-root factor of cov supplied by the caller
/// (U = mean + factor Z with Z standard normal).
double gaussianExpectationFactored(
    const QuadratureRule &rule, const Vector &mean, const Matrix &factor,
    const std::function<double(const Vector &)> &g);

/// Tensor Gauss-Hermite nodes mean + factor z with their weights.
struct WeightedNode {
  Vector point;
  double weight;
};
std::vector<WeightedNode> gaussianNodes(int order, const Vector &mean,
                                        const Matrix &factor);

/// Adaptive Gauss-Kronrod on [a, b] (a finite or -inf, b finite or +inf).
struct Integral1D {
  double value = 0;
  double errorEstimate = 0;
};
Integral1D integrateAdaptive(const std::function<double(double)> &f, double a,
                             double b, double relTol = 1e-10,
                             unsigned maxDepth = 30);

/// Composite Simpson rule with n (even) panels.
double integrateSimpson(const std::function<double(double)> &f, double a,
                        double b, int panels);

} // namespace oulab

#endif // OULAB_QUADRATURE_HPP
