#include "support.hpp"

#include "oulab/semigroup_ops.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

using namespace oulab;
using namespace oulab::testing;

namespace {

Vector v1(double x) { return Vector::Constant(1, x); }

double gammaInfIntegral1d(const std::function<double(double)> &g) {
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      [&](double u) { return g(u) * std::exp(-0.5 * u * u) / std::sqrt(2 * M_PI); },
      -std::numeric_limits<double>::infinity(),
      std::numeric_limits<double>::infinity(), 15, 1e-13);
}

} // namespace

TEST_SUITE("semigroup_ops") {

TEST_CASE("constants are preserved") {
  const OUModel m = randomStableModel(2, 51);
  const QuadratureRule rule = QuadratureRule::forDimension(2);
  const SemigroupEvaluator one(m, rule, TestFunction::constant(m, 1));
  for (std::uint64_t i = 0; i < 20; ++i) {
    PointStream rng(52, i);
    const Vector x = rng.uniformBox(2, 2);
    const double t = rng.uniform(0.01, 5);
    CHECK(one.apply(x, t) == doctest::Approx(1).epsilon(1e-12));
    CHECK(one.apply(x, t, OperatorPart::Full, SemigroupForm::Kernel) ==
          doctest::Approx(1).epsilon(1e-10));
  }
}

TEST_CASE("linear functions are eigenfunctions of the standard model") {
  const OUModel s = standardModel(1);
  const QuadratureRule rule = QuadratureRule::forDimension(1);
  const TestFunction f = TestFunction::linear(s, v1(1));
  for (double x : {-2.0, 0.5, 1.0}) {
    for (double t : {0.1, 1.0, 3.0}) {
      CHECK(applySemigroup(s, rule, f, v1(x), t) ==
            doctest::Approx(std::exp(-t) * x).epsilon(1e-12));
      CHECK(applySemigroup(s, rule, f, v1(x), t, SemigroupForm::Kernel) ==
            doctest::Approx(std::exp(-t) * x).epsilon(1e-10));
    }
  }
}

TEST_CASE("kernel and Kolmogorov forms agree") {
  const OUModel m = randomStableModel(2, 53);
  const QuadratureRule rule = QuadratureRule::forDimension(2);
  const TestFunction f = TestFunction::gaussianBump(m, Vector::Constant(2, 0.3), 0.5);
  for (std::uint64_t i = 0; i < 20; ++i) {
    PointStream rng(54, i);
    const Vector x = rng.uniformBox(2, 1.5);
    const double t = rng.uniform(0.05, 3);
    CHECK(applySemigroup(m, rule, f, x, t, SemigroupForm::Kernel) ==
          doctest::Approx(applySemigroup(m, rule, f, x, t)).epsilon(1e-8));
  }
}

TEST_CASE("bump normalisation") {
  const OUModel s = standardModel(1);
  for (double width : {0.1, 0.5, 2.0}) {
    const TestFunction f = TestFunction::gaussianBump(s, v1(0.4), width);
    CHECK(f.l1Norm() == doctest::Approx(1).epsilon(1e-10));
    CHECK(gammaInfIntegral1d([&](double u) { return f(v1(u)); }) ==
          doctest::Approx(1).epsilon(1e-10));
  }
}

TEST_CASE("local and global parts") {
  const OUModel s = standardModel(1);
  const PartitionOfUnity pou(s);
  const QuadratureRule rule = QuadratureRule::forDimension(1);
  const TestFunction one = TestFunction::constant(s, 1);
  const TestFunction bump = TestFunction::gaussianBump(s, v1(0.2), 0.3);
  for (double x : {0.0, 1.3, 3.0}) {
    for (double t : {0.05, 0.5, 1.0}) {
      const LocalGlobal c = applyLocalGlobal(s, pou, rule, one, v1(x), t);
      CHECK(c.local + c.global == doctest::Approx(1).epsilon(1e-10));
      CHECK(c.local >= 0);
      CHECK(c.global >= -1e-14);
      const LocalGlobal b = applyLocalGlobal(s, pou, rule, bump, v1(x), t);
      CHECK(b.local + b.global ==
            doctest::Approx(applySemigroup(s, rule, bump, v1(x), t)).epsilon(1e-8));
    }
  }
  // Far from the bump every u it charges is in a distant ring.
  const SemigroupEvaluator ev(s, rule, TestFunction::gaussianBump(s, v1(0), 0.1), &pou);
  CHECK(std::abs(ev.apply(v1(10), 0.5, OperatorPart::Local)) <= 1e-12);
}

TEST_CASE("variation of the semigroup path") {
  const OUModel s = standardModel(1);
  const QuadratureRule rule = QuadratureRule::forDimension(1);
  const TimeGrid grid = TimeGrid::geometric(0.1, 5, 32);
  const SemigroupEvaluator lin(s, rule, TestFunction::linear(s, v1(1)));
  const RefinedVariation r = variationOperator(lin, v1(1), grid, 1);
  CHECK(r.value == doctest::Approx(std::exp(-0.1) - std::exp(-5)).epsilon(1e-10));
  CHECK(r.converged);

  const SemigroupEvaluator one(s, rule, TestFunction::constant(s, 1));
  CHECK(variationOperator(one, v1(0.7), grid, 2).value <= 1e-12);
}

TEST_CASE("refinement never lowers the variation") {
  auto phi = [](double t) { return std::sin(7 * std::log(t)) * std::exp(-t); };
  const TimeGrid grid = TimeGrid::geometric(1e-3, 10, 4);
  double last = 0;
  for (int d = 0; d <= 4; ++d) {
    const RefinedVariation r = refinedVariation(phi, grid, 2, d, 0);
    CHECK(r.value >= last - 1e-15);
    last = r.value;
  }
  const RefinedVariation coarse = refinedVariation(phi, grid, 2, 0, 1e-12, 0);
  CHECK_FALSE(coarse.converged);
}

TEST_CASE("time grids") {
  const TimeGrid g = TimeGrid::geometric(0.01, 1, 10);
  CHECK(g.size() == 21);
  CHECK(g.points().front() == 0.01);
  CHECK(g.points().back() == 1);
  const TimeGrid r = g.refined();
  CHECK(r.size() == 2 * g.size() - 1);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(r.points()[2 * i] == g.points()[i]);
  }
  CHECK_THROWS_AS(TimeGrid({1.0, 1.0}), Error);
  CHECK_THROWS_AS(TimeGrid({0.0, 1.0}), Error);
  CHECK_THROWS_AS(TimeGrid::geometric(1, 0.5, 10), Error);
}

TEST_CASE("mixed derivative") {
  const OUModel m = randomStableModel(2, 55);
  for (std::uint64_t i = 0; i < 30; ++i) {
    PointStream rng(56, i);
    const KernelPoint p{rng.uniformBox(2, 1.5), rng.uniformBox(2, 1.5),
                        rng.uniform(0.1, 2)};
    for (Index l = 0; l < 2; ++l) {
      const double fd = mixedDerivativeFiniteDifference(m, p, l);
      CHECK(mixedDerivative(m, p, l) ==
            doctest::Approx(fd).epsilon(1e-6).scale(std::max(1.0, std::abs(fd))));
    }
  }
}

TEST_CASE("weak type statistic on a known sample") {
  std::vector<double> values(100);
  std::iota(values.begin(), values.end(), 1.0);
  const WeakTypeStatistic w = weakTypeStatistic(values, false, 1);
  CHECK(w.value == doctest::Approx(25.5));
  CHECK(w.alpha == 51);
  CHECK(w.lambda == doctest::Approx(0.5));
  CHECK(w.ciWidth > 0);
  // Thresholds with fewer than 60 exceedances are excluded.
  CHECK(weakTypeStatistic(values, false, 60).value == doctest::Approx(24.6));
  const WeakTypeStatistic lw = weakTypeStatistic(values, true, 1);
  double oracle = 0;
  for (int k = 1; k <= 99; ++k) {
    const double a = 101 - k;
    oracle = std::max(oracle, a * std::sqrt(std::log(a)) * k / 100);
  }
  CHECK(lw.value == doctest::Approx(oracle));
  CHECK(weakTypeStatistic(std::vector<double>(10, 0.0), false, 1).value == 0);
}

TEST_CASE("regime names") {
  for (WeakTypeRegime r : {WeakTypeRegime::Full, WeakTypeRegime::LargeTime,
                           WeakTypeRegime::GlobalSmallTime,
                           WeakTypeRegime::LocalSmallTime}) {
    CHECK((parseRegime(toString(r)) == r));
  }
  CHECK_THROWS_AS(parseRegime("medium"), Error);
}

}
