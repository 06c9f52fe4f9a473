#ifndef OULAB_LINALG_HPP
#define OULAB_LINALG_HPP

// Small dense kernels used by the model: matrix exponential, Lyapunov
// solve, symmetric square roots. Everything is templated on the Eigen
// expression type so fixed-size and dynamic matrices both work.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace oulab::linalg {

template <typename Derived>
using PlainMatrix = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic,
                                  Eigen::Dynamic>;

/// Matrix exponential by scaling and squaring with the degree-13 Pade
/// approximant (Higham 2005).
template <typename Derived>
PlainMatrix<Derived> expm(const Eigen::MatrixBase<Derived> &a) {
  using Scalar = typename Derived::Scalar;
  using M = PlainMatrix<Derived>;
  static constexpr Scalar b[] = {64764752532480000.0,
                                 32382376266240000.0,
                                 7771770303897600.0,
                                 1187353796428800.0,
                                 129060195264000.0,
                                 10559470521600.0,
                                 670442572800.0,
                                 33522128640.0,
                                 1323241920.0,
                                 40840800.0,
                                 960960.0,
                                 16380.0,
                                 182.0,
                                 1.0};
  constexpr Scalar theta13 = 5.371920351148152;

  const Eigen::Index n = a.rows();
  const Scalar norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > theta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
  }
  const M as = a / std::ldexp(Scalar(1), squarings);
  const M id = M::Identity(n, n);
  const M a2 = as * as;
  const M a4 = a2 * a2;
  const M a6 = a4 * a2;
  const M u =
      as * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 +
            b[5] * a4 + b[3] * a2 + b[1] * id);
  const M v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 +
              b[4] * a4 + b[2] * a2 + b[0] * id;
  M r = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) {
    r = (r * r).eval();
  }
  return r;
}

/// Solves B X + X B^T + Q = 0 through the Kronecker system
/// (I (x) B + B (x) I) vec X = -vec Q. Intended for n <= 8.
template <typename DerivedB, typename DerivedQ>
PlainMatrix<DerivedB> solveLyapunov(const Eigen::MatrixBase<DerivedB> &bmat,
                                    const Eigen::MatrixBase<DerivedQ> &q) {
  using M = PlainMatrix<DerivedB>;
  using Scalar = typename DerivedB::Scalar;
  const Eigen::Index n = bmat.rows();
  M kron = M::Zero(n * n, n * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      // row index of X(i, j) in column-major vec is i + n j
      for (Eigen::Index k = 0; k < n; ++k) {
        kron(i + n * j, k + n * j) += bmat(i, k);
        kron(i + n * j, i + n * k) += bmat(j, k);
      }
    }
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rhs(n * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      rhs(i + n * j) = -q(i, j);
    }
  }
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sol =
      kron.fullPivLu().solve(rhs);
  M x(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      x(i, j) = sol(i + n * j);
    }
  }
  return (0.5 * (x + x.transpose())).eval();
}

/// f(A) for symmetric A via its eigendecomposition.
template <typename Derived, typename F>
PlainMatrix<Derived> symmetricFunction(const Eigen::MatrixBase<Derived> &a,
                                       F &&f) {
  Eigen::SelfAdjointEigenSolver<PlainMatrix<Derived>> es(a.derived());
  const auto &vecs = es.eigenvectors();
  auto vals = es.eigenvalues().unaryExpr(f).eval();
  PlainMatrix<Derived> out = vecs * vals.asDiagonal() * vecs.transpose();
  return (0.5 * (out + out.transpose())).eval();
}

template <typename Derived>
PlainMatrix<Derived> spdSqrt(const Eigen::MatrixBase<Derived> &a) {
  return symmetricFunction(a, [](auto v) { return std::sqrt(v); });
}

template <typename Derived>
PlainMatrix<Derived> spdInvSqrt(const Eigen::MatrixBase<Derived> &a) {
  return symmetricFunction(a, [](auto v) { return 1 / std::sqrt(v); });
}

template <typename Derived>
typename Derived::Scalar symmetryDefect(const Eigen::MatrixBase<Derived> &a) {
  return (a - a.transpose()).cwiseAbs().maxCoeff();
}

template <typename Derived>
typename Derived::Scalar
spectralAbscissa(const Eigen::MatrixBase<Derived> &a) {
  Eigen::EigenSolver<PlainMatrix<Derived>> es(a.derived(), false);
  return es.eigenvalues().real().maxCoeff();
}

/// 2-norm condition number of a symmetric positive definite matrix.
template <typename Derived>
typename Derived::Scalar spdCondition(const Eigen::MatrixBase<Derived> &a) {
  Eigen::SelfAdjointEigenSolver<PlainMatrix<Derived>> es(a.derived(),
                                                         Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
}

} // namespace oulab::linalg

#endif // OULAB_LINALG_HPP
