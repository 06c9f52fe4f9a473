#ifndef OULAB_TESTS_SUPPORT_HPP
#define OULAB_TESTS_SUPPORT_HPP

// Oracles shared by the unit and acceptance tests. None of them calls the
// library routine it is used to check.

#include "oulab/ou_model.hpp"
#include "oulab/random.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace oulab::testing {

/// Q = A A^T + I/2, B = -(C C^T + I/2) + S with S skew, so the symmetric
/// part of B is negative definite and B is stable.
inline OUModel randomStableModel(Index n, std::uint64_t seed) {
  PointStream rng(seed, 0);
  Matrix a(n, n), c(n, n), s(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      a(i, j) = 0.6 * rng.normal();
      c(i, j) = 0.6 * rng.normal();
      s(i, j) = 0.6 * rng.normal();
    }
  }
  const Matrix id = Matrix::Identity(n, n);
  const Matrix q = a * a.transpose() + 0.5 * id;
  const Matrix b = -(c * c.transpose() + 0.5 * id) + (s - s.transpose()) / 2;
  return buildModel(q, b);
}

inline Matrix expOracle(const Matrix &m) { return m.exp(); }

/// Entrywise adaptive Gauss-Kronrod of e^{sB} Q e^{sB^T} over [0, t].
inline Matrix qtOracle(const OUModel &model, double t) {
  const Index n = model.dim();
  Matrix out(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      auto entry = [&](double s) {
        const Matrix e = expOracle(s * model.B());
        return (e * model.Q() * e.transpose())(i, j);
      };
      out(i, j) = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
          entry, 0.0, t, 15, 1e-13);
    }
  }
  return out;
}

/// Brute-force v(rho) over every subsequence with at least two points.
inline double exhaustiveVariation(std::span<const double> v, double rho) {
  const std::size_t n = v.size();
  double best = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    double sum = 0;
    int prev = -1;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        if (prev >= 0) {
          sum += std::pow(std::abs(v[i] - v[prev]), rho);
        }
        prev = static_cast<int>(i);
      }
    }
    best = std::max(best, sum);
  }
  return std::pow(best, 1 / rho);
}

/// Two-level Richardson extrapolation of the central difference.
inline double richardsonDerivative(const std::function<double(double)> &f,
                                   double x, double h) {
  const double d1 = (f(x + h) - f(x - h)) / (2 * h);
  const double d2 = (f(x + h / 2) - f(x - h / 2)) / h;
  return (4 * d2 - d1) / 3;
}

inline double relativeError(const Matrix &a, const Matrix &b) {
  return (a - b).norm() / b.norm();
}

/// Least-squares slope of log y against log x.
inline double logLogSlope(const std::vector<double> &x,
                          const std::vector<double> &y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

} // namespace oulab::testing

#endif // OULAB_TESTS_SUPPORT_HPP
