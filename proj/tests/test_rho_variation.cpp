#include "support.hpp"

#include "oulab/rho_variation.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <vector>

using namespace oulab;
using namespace oulab::testing;

TEST_SUITE("rho_variation") {

TEST_CASE("small paths against brute force") {
  const std::vector<double> zigzag{0, 1, 0, 1, 0};
  CHECK(variation(zigzag, VariationOrder(1)) == doctest::Approx(4));
  CHECK(variation(zigzag, VariationOrder(2)) == doctest::Approx(2));

  const std::vector<double> p{0, 3, 1, 4};
  CHECK(variation(p, VariationOrder(2)) == doctest::Approx(std::sqrt(22.0)));
  CHECK(exhaustiveVariation(p, 2) == doctest::Approx(std::sqrt(22.0)));
}

TEST_CASE("degenerate paths") {
  const std::vector<double> flat(7, 3.5);
  for (double rho : {1.0, 2.0, 3.5}) {
    CHECK(variation(flat, VariationOrder(rho)) == 0);
  }
  const std::vector<double> single{1.0};
  CHECK(variation(single, VariationOrder(2)) == 0);
  const std::vector<double> two{0.25, -1.5};
  for (double rho : {1.0, 2.0, 7.0}) {
    CHECK(variation(two, VariationOrder(rho)) == doctest::Approx(1.75));
  }
  CHECK_THROWS_AS(VariationOrder(0.5), Error);
  CHECK_THROWS_AS(variation(std::vector<double>{}, VariationOrder(2)), Error);
}

TEST_CASE("discrete estimate and monotone paths") {
  const std::vector<double> pm{1, -1};
  CHECK(discreteVariation(pm, VariationOrder(2)) == doctest::Approx(2));

  std::vector<double> ramp;
  for (int i = 1; i <= 10; ++i) {
    ramp.push_back(i);
  }
  for (double rho : {1.0, 2.0, 3.0}) {
    CHECK(variation(ramp, VariationOrder(rho)) == doctest::Approx(9));
  }
}

TEST_CASE("DP and reduction agree with brute force on random walks") {
  for (std::uint64_t i = 0; i < 200; ++i) {
    PointStream rng(21, i);
    std::vector<double> walk{0};
    for (int k = 1; k < 12; ++k) {
      walk.push_back(walk.back() + (rng.uniform() < 0.5 ? -1 : 1));
    }
    for (double rho : {1.0, 2.0, 3.0}) {
      const double oracle = exhaustiveVariation(walk, rho);
      CHECK(variationDp(walk, VariationOrder(rho)) == doctest::Approx(oracle).epsilon(1e-12));
      CHECK(variation(walk, VariationOrder(rho)) == doctest::Approx(oracle).epsilon(1e-12));
    }
  }
}

TEST_CASE("order monotonicity and subadditivity") {
  for (std::uint64_t i = 0; i < 10000; ++i) {
    PointStream rng(22, i);
    const std::size_t n = 3 + static_cast<std::size_t>(rng.uniform() * 30);
    std::vector<double> t(n), v(n);
    for (std::size_t k = 0; k < n; ++k) {
      t[k] = static_cast<double>(k);
      v[k] = rng.normal();
    }
    const std::size_t split =
        1 + static_cast<std::size_t>(rng.uniform() * (n - 2));
    const auto r = variationProperties(SampledPath(t, v), 1.5, 3, split);
    CHECK(r.monotoneInOrder);
    CHECK(r.subadditive);
  }
  const SampledPath bump({0, 1, 2}, {0, 1, 0});
  const auto r = variationProperties(bump, 1, 2, 1);
  CHECK(r.lowOrderValue == doctest::Approx(r.left + r.right));
}

TEST_CASE("derivative bound") {
  const auto line = derivativeBoundCheck([](double t) { return t; },
                                         [](double) { return 1.0; }, 0, 1, 1,
                                         1000);
  CHECK(line.variation == doctest::Approx(1));
  CHECK(line.derivativeIntegral == doctest::Approx(1));

  const double w = 2 * std::numbers::pi;
  auto phi = [w](double t) { return std::sin(w * t); };
  auto dphi = [w](double t) { return w * std::cos(w * t); };
  const auto tv = derivativeBoundCheck(phi, dphi, 0, 1, 1, 4001);
  CHECK(tv.variation == doctest::Approx(4).epsilon(1e-6));
  CHECK(tv.derivativeIntegral == doctest::Approx(4).epsilon(1e-8));
  const auto v2 = derivativeBoundCheck(phi, dphi, 0, 1, 2, 4001);
  CHECK(v2.holds);
  CHECK(v2.variation <= 4 + 1e-9);
}

TEST_CASE("CSV paths") {
  const std::string file = "rho_variation_path.csv";
  {
    std::ofstream out(file);
    out << "t,value\n0,0\n1,3\n2,1\n3,4\n";
  }
  const SampledPath p = readPathCsv(file);
  CHECK(p.size() == 4);
  CHECK(variation(p, VariationOrder(2)) == doctest::Approx(4.690416).epsilon(1e-7));
  {
    std::ofstream out(file);
    out << "0,0\n1,1\n1,2\n";
  }
  CHECK_THROWS_AS(readPathCsv(file), Error);
  std::remove(file.c_str());
}

}
