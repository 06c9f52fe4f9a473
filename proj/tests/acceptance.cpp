// Acceptance suite: one PASS/FAIL line per criterion, with the measured
// statistic and the wall time against its limit. Exit status is nonzero if
// any criterion fails.

#include "support.hpp"

#include "oulab/gauss_geometry.hpp"
#include "oulab/mehler_kernel.hpp"
#include "oulab/ou_model.hpp"
#include "oulab/quadrature.hpp"
#include "oulab/rho_variation.hpp"
#include "oulab/semigroup_ops.hpp"
#include "oulab/torus_lab.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace oulab;
using namespace oulab::testing;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char *title;
  double limitSeconds;
  std::function<Outcome()> run;
};

std::string fmt(const char *format, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

OUModel random2d() { return randomStableModel(2, 202); }

// Five Gaussian-times-polynomial functions in dimension n.
std::vector<TestFunction> gaussianPolynomials(const OUModel &m) {
  const Index n = m.dim();
  const Matrix id = Matrix::Identity(n, n);
  const Vector ones = Vector::Ones(n);
  const Vector e1 = Vector::Unit(n, 0);
  Matrix c2 = 0.5 * id;
  c2(0, 0) = 0.25;
  std::vector<TestFunction> out;
  out.push_back(TestFunction::polynomialGaussian(m, 1, Vector::Zero(n),
                                                 Matrix::Zero(n, n),
                                                 {0.3 * ones, 0.5 * id}));
  out.push_back(TestFunction::polynomialGaussian(m, 0, e1, Matrix::Zero(n, n),
                                                 {-0.2 * ones, id}));
  out.push_back(TestFunction::polynomialGaussian(m, 1, Vector::Zero(n), id,
                                                 {Vector::Zero(n), 2 * id}));
  out.push_back(TestFunction::polynomialGaussian(m, 2, -e1 + 0.5 * ones, c2,
                                                 {0.5 * ones, 0.8 * id}));
  out.push_back(TestFunction::gaussianBump(m, 0.4 * ones, 0.1));
  return out;
}

std::vector<Vector> probePoints(Index n) {
  std::vector<Vector> xs;
  for (double s : {0.0, 0.35, -0.8}) {
    Vector x = Vector::Constant(n, s);
    x(0) += 0.1;
    xs.push_back(x);
  }
  return xs;
}

// 1. DP variation against brute force.
Outcome variationOracle() {
  double worst = 0;
  for (std::size_t i = 0; i < 1000; ++i) {
    PointStream rng(11, i);
    const std::size_t len = 1 + static_cast<std::size_t>(rng.uniform() * 14);
    std::vector<double> v(len);
    for (double &y : v) {
      y = rng.normal();
    }
    for (double rho : {1.0, 2.0, 3.0}) {
      const double oracle = exhaustiveVariation(v, rho);
      const double fast = variation(v, VariationOrder(rho));
      const double dp = variationDp(v, VariationOrder(rho));
      worst = std::max({worst, std::abs(fast - oracle) / std::max(1.0, oracle),
                        std::abs(dp - oracle) / std::max(1.0, oracle)});
    }
  }
  return {worst <= 1e-12, fmt("max deviation %.2e", worst)};
}

// 2. Q_t against quadrature of its defining integral.
Outcome qtIdentity() {
  double worst = 0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const OUModel m = randomStableModel(1 + static_cast<Index>(k % 3), 500 + k);
    for (double t : {0.01, 0.5, 5.0}) {
      worst = std::max(worst, relativeError(covarianceQt(m, t), qtOracle(m, t)));
    }
  }
  return {worst <= 1e-8, fmt("max relative error %.2e", worst)};
}

// 3. H_{s+t} f = H_s H_t f.
Outcome semigroupLaw() {
  double worst = 0;
  for (const OUModel &m : {standardModel(1), random2d()}) {
    const QuadratureRule rule = QuadratureRule::forDimension(m.dim());
    for (const TestFunction &f : gaussianPolynomials(m)) {
      const SemigroupEvaluator ev(m, rule, f);
      for (double t : {0.1, 0.5}) {
        const SemigroupEvaluator outer(m, rule,
                                       TestFunction::custom(m, ev.field(t)));
        for (double s : {0.1, 0.5}) {
          for (const Vector &x : probePoints(m.dim())) {
            const double direct = ev.apply(x, s + t);
            const double composed = outer.apply(x, s);
            worst = std::max(worst, std::abs(direct - composed) /
                                        std::abs(direct));
          }
        }
      }
    }
  }
  return {worst <= 1e-6, fmt("max relative gap %.2e", worst)};
}

// 4. Central difference in t against the generator.
Outcome generatorConsistency() {
  const std::vector<double> hs{1e-2, 3e-3, 1e-3};
  double minSlope = 1e300;
  for (const OUModel &m : {standardModel(1), random2d()}) {
    const QuadratureRule rule = QuadratureRule::forDimension(m.dim());
    std::vector<TestFunction> fs = gaussianPolynomials(m);
    // e^{-R(x)}.
    fs.push_back(TestFunction::polynomialGaussian(
        m, 1, Vector::Zero(m.dim()), Matrix::Zero(m.dim(), m.dim()),
        {Vector::Zero(m.dim()), m.Qinf()}));
    for (const TestFunction &f : fs) {
      const SemigroupEvaluator ev(m, rule, f);
      const double t = 0.5;
      for (const Vector &x : probePoints(m.dim())) {
        const double lhf = applyGenerator(m, ev.field(t), x);
        std::vector<double> errs;
        for (double h : hs) {
          const double cd = (ev.apply(x, t + h) - ev.apply(x, t - h)) / (2 * h);
          errs.push_back(std::abs(cd - lhf));
        }
        minSlope = std::min(minSlope, logLogSlope(hs, errs));
      }
    }
  }
  return {minSlope >= 1.8, fmt("min log-log slope %.3f", minSlope)};
}

// int f dgamma_inf sampled from the Gaussian factor of f, which resolves
// narrow bumps that a rule on gamma_inf would miss.
double gammaInfMass(const OUModel &m, const QuadratureRule &rule,
                    const TestFunction &f) {
  if (!f.gaussian()) {
    return gaussianExpectation(rule, Vector::Zero(m.dim()), m.Qinf(),
                               [&](const Vector &u) { return f(u); });
  }
  const GaussianFactor &g = *f.gaussian();
  const double scale = std::pow(2 * std::numbers::pi, 0.5 * m.dim()) *
                       std::sqrt(g.cov.determinant());
  return scale * gaussianExpectation(rule, g.center, g.cov, [&](const Vector &u) {
           return f.polynomial(u) * gammaDensity(m, kInfiniteTime, u);
         });
}

// 5. H_t 1 = 1 and invariance of gamma_inf.
Outcome conservation() {
  double worstOne = 0, worstMass = 0;
  for (const OUModel &m : {standardModel(1), random2d()}) {
    const QuadratureRule rule = QuadratureRule::forDimension(m.dim());
    const Vector zero = Vector::Zero(m.dim());
    const SemigroupEvaluator one(m, rule, TestFunction::constant(m, 1));
    for (const TestFunction &f : gaussianPolynomials(m)) {
      const SemigroupEvaluator ev(m, rule, f);
      const double mass = gammaInfMass(m, rule, f);
      for (double t : {0.1, 0.5, 2.0}) {
        const double evolved = gaussianExpectation(
            rule, zero, m.Qinf(), [&](const Vector &x) { return ev.apply(x, t); });
        worstMass = std::max(worstMass, std::abs(evolved - mass));
        for (const Vector &x : probePoints(m.dim())) {
          worstOne = std::max(worstOne, std::abs(one.apply(x, t) - 1));
        }
      }
    }
  }
  return {worstOne <= 1e-8 && worstMass <= 1e-8,
          fmt("|H_t 1 - 1| %.2e, mass drift %.2e", worstOne, worstMass)};
}

// 6. d/du_l K_t = -K_t R_l by finite differences of log K.
Outcome kernelDerivativeIdentity() {
  double worst = 0;
  for (const OUModel &m : {standardModel(1), standardModel(2), random2d()}) {
    const Index n = m.dim();
    for (std::size_t i = 0; i < 100; ++i) {
      PointStream rng(61, i);
      const Vector x = rng.uniformBox(n, 2);
      const Vector u = rng.uniformBox(n, 2);
      const double t = std::exp(rng.uniform(std::log(0.01), std::log(2.0)));
      const KernelSlice slice(m, t);
      const Vector r = slice.rVector(x, u);
      for (Index l = 0; l < n; ++l) {
        auto logK = [&](double ul) {
          Vector v = u;
          v(l) = ul;
          return slice.logK(x, v);
        };
        const double d = richardsonDerivative(logK, u(l), 1e-3 * std::sqrt(t));
        worst = std::max(worst, std::abs(d + r(l)) / std::max(1.0, std::abs(r(l))));
      }
    }
  }
  return {worst <= 1e-5, fmt("max relative residual %.2e", worst)};
}

// 7. Zero count of t -> dK/dt under grid doubling.
Outcome zeroCount() {
  bool ok = true;
  std::ostringstream detail;
  for (const OUModel &m : {standardModel(1), random2d()}) {
    const ZeroScanner scanner(m);
    int base = 0, doubled = 0;
    for (std::size_t i = 0; i < 10000; ++i) {
      PointStream rng(71, i);
      const Vector x = rng.uniformBox(m.dim(), 3);
      const Vector u = rng.uniformBox(m.dim(), 3);
      base = std::max(base, scanner.countOnGrid(x, u, false));
      doubled = std::max(doubled, scanner.countOnGrid(x, u, true));
    }
    ok = ok && base == doubled;
    detail << "n=" << m.dim() << " max " << base << "/" << doubled << " ";
  }
  return {ok, detail.str()};
}

// 8. Calibrated Gaussian bounds for K and dK/dt.
Outcome boundCalibrations() {
  bool ok = true;
  std::ostringstream detail;
  const std::vector<BoundKind> kinds{BoundKind::Litet, BoundKind::DotKeps,
                                     BoundKind::DotK1, BoundKind::Ineq100};
  for (const OUModel &m : {standardModel(1), standardModel(2)}) {
    const ProbeReport r = kernelBoundsProbe(m, kinds, CalibrationSpec{});
    ok = ok && r.passed();
    double worst = 0;
    for (BoundKind k : kinds) {
      const std::string key = toString(k);
      worst = std::max(worst, r.statistic(key + "_max_ratio") /
                                  r.statistic(key + "_half_sample_ratio"));
    }
    detail << "n=" << m.dim() << " worst ratio/half " << fmt("%.3f", worst)
           << " ";
  }
  return {ok, detail.str()};
}

// 9. Size and smoothness of the local variation kernel.
Outcome czEstimates() {
  bool ok = true;
  std::ostringstream detail;
  for (const OUModel &m : {standardModel(1), standardModel(2)}) {
    const PartitionOfUnity pou(m);
    const ProbeReport r = czProbe(m, pou, CzSweepConfig{});
    ok = ok && r.passed();
    detail << "n=" << m.dim() << " drift "
           << fmt("%.3f/%.3f", r.statistic("size_drift"),
                  r.statistic("smooth_drift"))
           << " ";
  }
  return {ok, detail.str()};
}

// 10. Exact identities of the Rademacher construction.
Outcome torusExactness() {
  bool ok = true;
  // ||T_N||_2^2 = N by summing over the finest dyadic cells.
  for (int N = 2; N <= 6; ++N) {
    const long long cells = 1LL << (3 * N);
    double sum = 0;
    for (long long j = 0; j < cells; ++j) {
      const double t = torus::tN(N, (j + 0.5) / static_cast<double>(cells));
      sum += t * t;
    }
    ok = ok && sum == N * static_cast<double>(cells);
  }
  for (int N = 1; N <= 20; ++N) {
    ok = ok && torus::khinchineCheck(N).l2 == std::sqrt(static_cast<double>(N));
  }
  // Partial sums and the martingale property at random dyadic points.
  const int N = 8;
  for (std::size_t i = 0; i < 100000 && ok; ++i) {
    PointStream rng(101, i);
    const torus::DyadicPoint x = torus::DyadicPoint::sample(rng);
    int partial = 0;
    for (int l = 2 * N; l <= 3 * N; ++l) {
      if (l > 2 * N) {
        const double cell = std::floor(std::ldexp(x.value(), l));
        partial += std::fmod(cell, 2) == 0 ? 1 : -1;
      }
      ok = ok && torus::applyE(N, l, x) == partial;
    }
  }
  // v(2) on the all-ones cell.
  for (int M : {4, 8, 12}) {
    torus::DyadicPoint x;
    x.numerator = (1ULL << (torus::DyadicPoint::kBits - 3 * M - 1)) + 1;
    ok = ok && torus::chainVariation(M, torus::ChainOperator::E, x) == M;
  }
  // Line and torus mean values agree.
  for (std::size_t i = 0; i < 2000 && ok; ++i) {
    PointStream rng(103, i);
    const double x = torus::DyadicPoint::sample(rng).value();
    for (int l = 2 * N; l <= 3 * N; ++l) {
      ok = ok && torus::applyD(N, l, x, torus::Domain::Line) ==
                     torus::applyD(N, l, x, torus::Domain::Torus);
    }
  }
  return {ok, ok ? "all identities exact" : "an identity failed"};
}

// 11. Fourier comparison of the Gaussian and the box averages.
Outcome fourierBound() {
  const ProbeReport r = torus::fourierProbe();
  return {r.passed(), fmt("max %.5f, tail %.1e, at zero %g",
                          r.statistic("max_sum"), r.statistic("tail_of_max"),
                          r.statistic("at_zero"))};
}

// 12. Growth of the dyadic martingale's v(2).
Outcome qianGrowth() {
  const ProbeReport r =
      torus::qianGrowth({4, 6, 8, 10, 12}, 10000, 1, torus::ChainOperator::E);
  const Table &t = r.tables().at("qian_growth");
  std::ostringstream detail;
  detail << "medians";
  for (const auto &row : t.rows) {
    detail << ' ' << fmt("%.3f", row[1]);
  }
  return {r.passed(), detail.str()};
}

// 13. Weak type (1,1) for rho = 3 in one dimension.
Outcome weakType() {
  const OUModel m = standardModel(1);
  const PartitionOfUnity pou(m);
  const QuadratureRule rule = QuadratureRule::forDimension(1);
  bool ok = true;
  std::ostringstream detail;
  for (auto [regime, samples] :
       {std::pair{WeakTypeRegime::Full, std::size_t{4000}},
        std::pair{WeakTypeRegime::LargeTime, std::size_t{16000}}}) {
    double previous = 0;
    detail << toString(regime);
    for (double width : {0.1, 0.05, 0.025}) {
      WeakTypeConfig cfg;
      cfg.rho = 3;
      cfg.regime = regime;
      cfg.bumpWidth = width;
      cfg.sampleSize = samples;
      const ProbeReport r = weakTypeProbe(m, pou, rule, cfg);
      const double stat = r.statistic("statistic");
      ok = ok && r.passed() && stat > 0;
      if (previous > 0) {
        ok = ok && stat <= 1.1 * previous && previous <= 1.1 * stat;
      }
      previous = stat;
      detail << ' ' << fmt("%.4f", stat);
    }
    detail << "; ";
  }
  return {ok, detail.str()};
}

// 14. Failure of the weak type estimate for rho = 2.
Outcome variationFailure() {
  const ProbeReport r = torus::weakTypeFailure(torus::FailureConfig{});
  const Table &t = r.tables().at("failure_growth");
  std::size_t col = 0;
  while (t.columns[col] != "W_p2") {
    ++col;
  }
  std::ostringstream detail;
  detail << "W_2";
  for (const auto &row : t.rows) {
    detail << ' ' << fmt("%.4f", row[col]);
  }
  return {r.passed(), detail.str()};
}

} // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "variation oracle equivalence", 10, variationOracle},
      {2, "Q_t identity", 5, qtIdentity},
      {3, "semigroup law", 30, semigroupLaw},
      {4, "generator consistency", 30, generatorConsistency},
      {5, "conservation and invariance", 10, conservation},
      {6, "kernel derivative identity", 10, kernelDerivativeIdentity},
      {7, "zero-count boundedness", 60, zeroCount},
      {8, "bound calibrations", 120, boundCalibrations},
      {9, "CZ standard estimates", 300, czEstimates},
      {10, "torus exactness", 30, torusExactness},
      {11, "Fourier bound", 5, fourierBound},
      {12, "Qian growth", 300, qianGrowth},
      {13, "weak type (1,1), rho = 3", 600, weakType},
      {14, "v(2) failure", 600, variationFailure},
  };
  int failures = 0;
  for (const Criterion &c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    const bool pass = o.pass && seconds <= c.limitSeconds;
    failures += pass ? 0 : 1;
    std::printf("%s %2d %-30s %s [%.1f s / %.0f s]\n", pass ? "PASS" : "FAIL",
                c.id, c.title, o.detail.c_str(), seconds, c.limitSeconds);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
