#include "oulab/gauss_geometry.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>

namespace oulab {

namespace {

double sigma(double s) { return std::exp(-1 / s); }

} // namespace

double smoothStep(double s) {
  if (s <= 0) {
    return 0;
  }
  if (s >= 1) {
    return 1;
  }
  const double a = sigma(s), b = sigma(1 - s);
  return a / (a + b);
}

double smoothStepDerivative(double s) {
  if (s <= 0 || s >= 1) {
    return 0;
  }
  const double a = sigma(s), b = sigma(1 - s);
  const double da = a / (s * s), db = -b / ((1 - s) * (1 - s));
  return (da * b - a * db) / ((a + b) * (a + b));
}

int ringOf(const OUModel &model, const Vector &x) {
  return static_cast<int>(std::floor(quadraticR(model, x)));
}

bool inRing(const OUModel &model, const Vector &x, int j) {
  const double r = quadraticR(model, x);
  return j >= 0 && r >= j && r <= j + 1;
}

double ringWidth(int j) {
  return std::sqrt(2.0) * (std::sqrt(j + 1.0) - std::sqrt(static_cast<double>(j)));
}

PartitionOfUnity::PartitionOfUnity(const OUModel &model)
    : qinfInv_(model.QinfInv()) {}

// r_0 absorbs the whole ball below level 1 so the family sums to one.
double PartitionOfUnity::chi(int j, double level) {
  if (j < 0) {
    return 0;
  }
  const double lower = j == 0 ? 1.0 : smoothStep(level - j);
  return lower - smoothStep(level - j - 1);
}

double PartitionOfUnity::chiDerivative(int j, double level) {
  if (j < 0) {
    return 0;
  }
  const double lower = j == 0 ? 0.0 : smoothStepDerivative(level - j);
  return lower - smoothStepDerivative(level - j - 1);
}

double PartitionOfUnity::chiTilde(int j, double level) {
  if (j < 0) {
    return 0;
  }
  return smoothStep(level - (j - 2)) - smoothStep(level - (j + 3));
}

double PartitionOfUnity::chiTildeDerivative(int j, double level) {
  if (j < 0) {
    return 0;
  }
  return smoothStepDerivative(level - (j - 2)) -
         smoothStepDerivative(level - (j + 3));
}

double PartitionOfUnity::r(int j, const Vector &x) const {
  return chi(j, level(x));
}

double PartitionOfUnity::rTilde(int j, const Vector &x) const {
  return chiTilde(j, level(x));
}

Vector PartitionOfUnity::rGradient(int j, const Vector &x) const {
  return chiDerivative(j, level(x)) * (qinfInv_ * x);
}

Vector PartitionOfUnity::rTildeGradient(int j, const Vector &x) const {
  return chiTildeDerivative(j, level(x)) * (qinfInv_ * x);
}

double PartitionOfUnity::eta(const Vector &x, const Vector &u) const {
  const double lx = level(x), lu = level(u);
  const int ju = static_cast<int>(std::floor(lu));
  double sum = 0;
  for (int j = ju - 1; j <= ju; ++j) {
    const double rj = chi(j, lu);
    if (rj != 0) {
      sum += chiTilde(j, lx) * rj;
    }
  }
  return std::min(1.0, std::max(0.0, sum));
}

Vector PartitionOfUnity::etaGradientX(const Vector &x, const Vector &u) const {
  const double lx = level(x), lu = level(u);
  const int ju = static_cast<int>(std::floor(lu));
  double coeff = 0;
  for (int j = ju - 1; j <= ju; ++j) {
    coeff += chiTildeDerivative(j, lx) * chi(j, lu);
  }
  return coeff * (qinfInv_ * x);
}

Vector PartitionOfUnity::etaGradientU(const Vector &x, const Vector &u) const {
  const double lx = level(x), lu = level(u);
  const int ju = static_cast<int>(std::floor(lu));
  double coeff = 0;
  for (int j = ju - 1; j <= ju; ++j) {
    coeff += chiTilde(j, lx) * chiDerivative(j, lu);
  }
  return coeff * (qinfInv_ * u);
}

double eta(const PartitionOfUnity &pou, const Vector &x, const Vector &u) {
  return pou.eta(x, u);
}

GradientBound etaGradientBound(const OUModel &model,
                               const PartitionOfUnity &pou,
                               const SampleSpec &spec) {
  const Index n = model.dim();
  GradientBound out;
  const double h = 1e-6;
  for (std::size_t i = 0; i < spec.size; ++i) {
    PointStream rng(spec.seed, i);
    const Vector x = rng.uniformBox(n, spec.radius);
    // |x-u|_Q of order 1/(1+|x|_Q) puts the pair in the transition zone.
    const double scale = 3.0 / (1 + normQ(model, x));
    const Vector u = x + scale * rng.normalVector(n);
    const auto fx = [&](const Vector &y) { return pou.eta(y, u); };
    const auto fu = [&](const Vector &y) { return pou.eta(x, y); };
    const double g = finiteDifferenceGradient(fx, x, h).norm() +
                     finiteDifferenceGradient(fu, u, h).norm();
    const double ratio = g / (1 + x.norm());
    out.constant = std::max(out.constant, ratio);
    if (i < spec.size / 2) {
      out.halfSample = out.constant;
    }
  }
  return out;
}

PolarCoordinates polarDecompose(const OUModel &model, const Vector &x,
                                double beta) {
  if (x.squaredNorm() == 0) {
    throw Error(ErrorCode::ZeroPoint, "polar coordinates need x != 0");
  }
  if (!(beta > 0)) {
    throw Error(ErrorCode::InvalidArgument, "level must be positive");
  }
  const double logBeta = std::log(beta);
  // g is strictly decreasing in s.
  const auto g = [&](double s) {
    return std::log(quadraticR(model, groupDt(model, -s) * x)) - logBeta;
  };
  double lo = 0, hi = 0;
  const double g0 = g(0);
  if (g0 == 0) {
    return {beta, 0.0, x};
  }
  double step = 1;
  if (g0 > 0) {
    hi = step;
    while (g(hi) > 0) {
      lo = hi;
      step *= 2;
      hi += step;
      if (hi > 1e3) {
        throw Error(ErrorCode::BracketFail, "polar bracket exceeded 1e3");
      }
    }
  } else {
    lo = -step;
    while (g(lo) < 0) {
      hi = lo;
      step *= 2;
      lo -= step;
      if (lo < -1e3) {
        throw Error(ErrorCode::BracketFail, "polar bracket exceeded 1e3");
      }
    }
  }
  boost::uintmax_t iters = 200;
  const auto tol = [](double a, double b) {
    return std::abs(b - a) <= 1e-15 * std::max(1.0, std::abs(a));
  };
  const auto root =
      boost::math::tools::toms748_solve(g, lo, hi, tol, iters);
  const double s = 0.5 * (root.first + root.second);
  return {beta, s, groupDt(model, -s) * x};
}

bool annulusCAlpha(const OUModel &model, double alpha, const Vector &x) {
  if (!(alpha > 2)) {
    throw Error(ErrorCode::AlphaTooSmall, "annulus needs alpha > 2");
  }
  const double r = quadraticR(model, x), la = std::log(alpha);
  return r >= 0.5 * la && r <= 2 * la;
}

double levelTailMass(const OUModel &model, double level) {
  if (level <= 0) {
    return 1;
  }
  return boost::math::gamma_q(0.5 * static_cast<double>(model.dim()), level);
}

} // namespace oulab
