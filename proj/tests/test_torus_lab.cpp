#include "support.hpp"

#include "oulab/torus_lab.hpp"

#include <doctest.h>

#include <cmath>

using namespace oulab;
using namespace oulab::testing;
using namespace oulab::torus;

TEST_SUITE("torus_lab") {

TEST_CASE("Rademacher functions") {
  CHECK(rademacher(1, 0.25) == 1);
  CHECK(rademacher(1, 0.75) == -1);
  CHECK(rademacher(2, 0.375) == -1);
  CHECK(rademacher(3, 0.0) == 1);
  CHECK_THROWS_AS(rademacher(0, 0.5), Error);
  CHECK_THROWS_AS(rademacher(1, 1.0), Error);

  // Exact inner products from the midpoints of the 2^-8 slots.
  const int bits = 8;
  const int cells = 1 << bits;
  for (int j = 1; j <= bits; ++j) {
    for (int k = j; k <= bits; ++k) {
      long sum = 0;
      for (int c = 0; c < cells; ++c) {
        const double x = (c + 0.5) / cells;
        sum += rademacher(j, x) * rademacher(k, x);
      }
      CHECK(sum == (j == k ? cells : 0));
    }
  }
}

TEST_CASE("dyadic points") {
  const DyadicPoint x{std::uint64_t{5} << 50}; // 0.101 in binary
  CHECK(x.value() == 0.625);
  CHECK(x.digit(1) == 1);
  CHECK(x.digit(2) == 0);
  CHECK(x.digit(3) == 1);
  for (std::uint64_t i = 0; i < 200; ++i) {
    PointStream rng(61, i);
    const DyadicPoint p = DyadicPoint::sample(rng);
    CHECK(p.numerator % 2 == 1);
    for (int k : {1, 7, 30, 52}) {
      CHECK(rademacher(k, p) == rademacher(k, p.value()));
      CHECK(rademacher(k, p) == 1 - 2 * p.digit(k));
    }
  }
}

TEST_CASE("periodised functions") {
  for (double u : {-0.75, 0.25, 1.25}) {
    CHECK(qk(1, u) == 1);
  }
  CHECK(qk(1, -1.5) == 0);
  CHECK(qk(1, 2.25) == 0);
  CHECK(gN(3, 0.001) == 3);
  CHECK(gN(3, 5.0) == 0);
  CHECK(tN(3, 0.001) == 3);
}

TEST_CASE("Gaussian averages") {
  // A constant slot function averages to one over the whole window.
  CHECK(gaussianStepAverage([](long long) { return 1.0; }, 0.125, -100, 100,
                            0.3, 0.5) == doctest::Approx(1).epsilon(1e-12));
  // Midpoint quadrature on cells aligned to the 2^-9 slots of r_9.
  const int N = 3, l = 7;
  const double x = 0.3, sigma = std::ldexp(1.0, -l);
  const double slot = std::ldexp(1.0, -3 * N);
  const int sub = 64;
  const double h = slot / sub;
  const double lo = std::floor((x - 12 * sigma) / slot) * slot;
  const double hi = std::ceil((x + 12 * sigma) / slot) * slot;
  double oracle = 0;
  for (double u = lo + h / 2; u < hi; u += h) {
    const double z = (u - x) / sigma;
    oracle += gN(N, u) * std::exp(-0.5 * z * z) * h / (sigma * std::sqrt(2 * M_PI));
  }
  CHECK(applyA(N, l, x) == doctest::Approx(oracle).epsilon(1e-6));
  CHECK(gaussianAverageGN(N, x, sigma) == doctest::Approx(oracle).epsilon(1e-6));
  // Far outside [-1, 2) only the tail of the Gaussian sees q_k.
  CHECK(std::abs(gaussianRademacher(2, 10, 0.1)) <= 1e-300);
}

TEST_CASE("mean value operator") {
  for (int N : {2, 3, 5}) {
    const double x = std::ldexp(1.0, -3 * N - 1);
    CHECK(applyD(N, 3 * N + 2, x, Domain::Torus) == N);
    CHECK(applyD(N, 3 * N + 2, x, Domain::Line) == N);
  }
  // The primitive of r_1 is a tent of height 1/2.
  CHECK(rademacherPrimitive(1, 0.5) == 0.5);
  CHECK(rademacherPrimitive(1, 1.0) == 0);
  CHECK(meanValueRademacher(1, 3, 0.25) == 1);
}

TEST_CASE("martingale chain") {
  for (std::uint64_t i = 0; i < 100; ++i) {
    PointStream rng(62, i);
    const DyadicPoint x = DyadicPoint::sample(rng);
    const int N = 5;
    CHECK(applyE(N, 2 * N, x) == 0);
    CHECK(applyE(N, 3 * N, x) == tN(N, x.value()));
    const std::vector<double> chain = chainValues(N, ChainOperator::E, x);
    REQUIRE(chain.size() == static_cast<std::size_t>(N + 1));
    for (std::size_t k = 1; k < chain.size(); ++k) {
      CHECK(std::abs(chain[k] - chain[k - 1]) == 1);
    }
    CHECK(chainVariation(N, ChainOperator::E, x) >= std::sqrt(double(N)) - 1e-12);
  }
  for (ChainOperator op : {ChainOperator::A, ChainOperator::DTorus, ChainOperator::E}) {
    CHECK((parseChainOperator(toString(op)) == op));
  }
}

TEST_CASE("Khinchine moments") {
  const KhinchineResult k = khinchineCheck(4);
  CHECK(k.l4Fourth == 40);
  CHECK(k.l2 == doctest::Approx(2));
  CHECK(k.linf == 4);
  CHECK(k.withinConstants);
  for (int N : {1, 6, 9}) {
    const KhinchineResult r = khinchineCheck(N);
    CHECK(r.l4Fourth == 3.0 * N * N - 2.0 * N);
    CHECK(r.linf <= N);
    CHECK(gNNormPower(N, 2) == doctest::Approx(3.0 * N));
  }
}

TEST_CASE("Fourier terms") {
  CHECK(fourierSum(40, 0) == 0);
  CHECK(fourierTerm(1, 1) == doctest::Approx(std::exp(-0.5 * M_PI * M_PI)).epsilon(1e-12));
  // Series branch against the direct formula just above its cutoff.
  const double xi = 0.02 / M_PI;
  const double a = 2 * M_PI * xi / 2;
  CHECK(fourierTerm(1, xi) ==
        doctest::Approx(std::abs(std::exp(-0.5 * a * a) - std::sin(a) / a)).epsilon(1e-6));
  const FourierComparison f = fourierComparison(30, 10, 1e-2, 1e6);
  CHECK(std::isfinite(f.maxSum));
  CHECK(f.maxSum < 2);
  CHECK(f.atZero == 0);
}

TEST_CASE("tensor residual") {
  Vector one(1);
  one << 0.3;
  for (int l = 7; l <= 9; ++l) {
    CHECK(tensorAssembly(3, one, l).residualFactor == 0);
  }
  Vector two(2);
  two << 0.3, 0.5;
  const TensorTerm t = tensorAssembly(3, two, 7);
  CHECK(t.residualFactor >= 0);
  CHECK(t.residualFactor <= 1e-12);
  CHECK(t.mainTerm == doctest::Approx(applyA(3, 7, 0.3)));
  CHECK(tensorResidualVariation(4, two).holds);
}

TEST_CASE("chain growth") {
  const ProbeReport a = qianGrowth({4, 6, 8}, 2000, 3);
  const ProbeReport b = qianGrowth({4, 6, 8}, 2000, 3);
  CHECK(a.toJson() == b.toJson());
  CHECK_THROWS_AS(qianGrowth({30}, 10, 1), Error);
}

TEST_CASE("Delta operator bound") {
  DeltaConfig c;
  c.Ns = {2, 3};
  c.pointSamples = 500;
  c.operatorSamples = 60;
  CHECK(deltaOperatorBound(standardModel(1), c).passed());
}

}
