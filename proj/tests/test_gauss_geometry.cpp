#include "support.hpp"

#include "oulab/gauss_geometry.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace oulab;
using namespace oulab::testing;

TEST_SUITE("gauss_geometry") {

TEST_CASE("rings") {
  const OUModel s = standardModel(1);
  CHECK(ringOf(s, Vector::Zero(1)) == 0);
  CHECK(ringOf(s, Vector::Constant(1, 2)) == 2);
  CHECK(inRing(s, Vector::Constant(1, 2), 1));
  CHECK(inRing(s, Vector::Constant(1, 2), 2));
  const double w = ringWidth(1);
  CHECK(w == doctest::Approx(std::sqrt(2.0) * (std::sqrt(2.0) - 1)));
  CHECK(w > 0.5);
  CHECK(w < std::sqrt(2.0));
  for (int j = 1; j <= 50; ++j) {
    CHECK(ringWidth(j) > 1 / (2 * std::sqrt(double(j + 1))));
    CHECK(ringWidth(j) < std::sqrt(2.0 / j));
  }
}

TEST_CASE("partition of unity sums to one") {
  const OUModel m = randomStableModel(2, 31);
  const PartitionOfUnity pou(m);
  for (std::uint64_t i = 0; i < 1000; ++i) {
    PointStream rng(32, i);
    const Vector x = rng.uniformBox(2, 6);
    double sum = 0;
    for (int j = 0; j <= 200; ++j) {
      sum += pou.r(j, x);
    }
    CHECK(sum == doctest::Approx(1).epsilon(1e-12));
  }
}

TEST_CASE("eta equals one near the diagonal") {
  const OUModel m = randomStableModel(2, 33);
  const PartitionOfUnity pou(m);
  for (std::uint64_t i = 0; i < 10000; ++i) {
    PointStream rng(34, i);
    const Vector x = rng.uniformBox(2, 5);
    CHECK(pou.eta(x, x) == 1);
    // A point at Q-distance at most 1 / (2 (1 + |x|_Q)).
    const Vector dir = rng.normalVector(2).normalized();
    const double radius = rng.uniform() / (2 * (1 + normQ(m, x)));
    const Vector u = x + m.QinfSqrt() * dir * radius;
    CHECK(pou.eta(x, u) == 1);
  }
}

TEST_CASE("eta equals one on adjacent rings") {
  const OUModel s = standardModel(1);
  const PartitionOfUnity pou(s);
  for (int j = 0; j < 20; ++j) {
    // Points with R in [j, j+2].
    for (double a : {0.0, 0.7, 1.3, 2.0}) {
      for (double b : {0.1, 1.0, 1.9}) {
        const Vector x = Vector::Constant(1, std::sqrt(2 * (j + a)));
        const Vector u = Vector::Constant(1, -std::sqrt(2 * (j + b)));
        CHECK(pou.eta(x, u) == doctest::Approx(1));
      }
    }
  }
  CHECK(pou.eta(Vector::Zero(1), Vector::Constant(1, 5)) == 0);
}

TEST_CASE("eta gradients") {
  const OUModel s = standardModel(1);
  const PartitionOfUnity pou(s);
  const Vector x = Vector::Constant(1, 2.2);
  const Vector u = Vector::Constant(1, 3.1);
  auto fx = [&](double v) { return pou.eta(Vector::Constant(1, v), u); };
  auto fu = [&](double v) { return pou.eta(x, Vector::Constant(1, v)); };
  CHECK(pou.etaGradientX(x, u)(0) == doctest::Approx(richardsonDerivative(fx, 2.2, 1e-4)).epsilon(1e-6));
  CHECK(pou.etaGradientU(x, u)(0) == doctest::Approx(richardsonDerivative(fu, 3.1, 1e-4)).epsilon(1e-6));
  CHECK(pou.etaGradientX(x, x).norm() == 0);

  const GradientBound b = etaGradientBound(s, pou, {4000, 1, 20});
  CHECK(std::isfinite(b.constant));
  CHECK(b.constant > 0);
  CHECK(b.constant <= 2 * b.halfSample);
}

TEST_CASE("polar coordinates") {
  const OUModel s = standardModel(1);
  auto p = polarDecompose(s, Vector::Constant(1, 2), 2);
  CHECK(p.s == doctest::Approx(0).scale(1));
  CHECK(p.xTilde(0) == doctest::Approx(2));
  p = polarDecompose(s, Vector::Constant(1, 2 * std::numbers::e), 2);
  CHECK(p.s == doctest::Approx(1));
  CHECK(p.xTilde(0) == doctest::Approx(2));
  CHECK_THROWS_AS(polarDecompose(s, Vector::Zero(1), 2), Error);

  const OUModel m = randomStableModel(2, 35);
  for (std::uint64_t i = 0; i < 1000; ++i) {
    PointStream rng(36, i);
    const Vector x = rng.uniformBox(2, 8);
    const PolarCoordinates q = polarDecompose(m, x, 1.5);
    CHECK(quadraticR(m, q.xTilde) == doctest::Approx(1.5).epsilon(1e-10));
    CHECK((groupDt(m, q.s) * q.xTilde - x).norm() <= 1e-10 * (1 + x.norm()));
  }
}

TEST_CASE("annulus C_alpha") {
  const OUModel s = standardModel(1);
  for (double alpha : {3.0, 10.0, 1e4}) {
    CHECK_FALSE(annulusCAlpha(s, alpha, Vector::Zero(1)));
  }
  CHECK(annulusCAlpha(s, std::exp(2.0), Vector::Constant(1, std::sqrt(2.0))));
  CHECK_THROWS_AS(annulusCAlpha(s, 1.5, Vector::Zero(1)), Error);
}

TEST_CASE("tail mass of the level sets") {
  const OUModel s1 = standardModel(1);
  const OUModel s2 = standardModel(2);
  for (double level : {0.5, 2.0, 9.0}) {
    CHECK(levelTailMass(s1, level) == doctest::Approx(std::erfc(std::sqrt(level))));
    CHECK(levelTailMass(s2, level) == doctest::Approx(std::exp(-level)));
  }
  // gamma_inf{R > 2 log alpha} alpha stays bounded.
  for (double alpha : {10.0, 100.0, 1000.0}) {
    CHECK(alpha * levelTailMass(s1, 2 * std::log(alpha)) <= 1);
  }
}

}
