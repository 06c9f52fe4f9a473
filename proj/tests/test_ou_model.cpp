#include "support.hpp"

#include "oulab/ou_model.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace oulab;
using namespace oulab::testing;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.begin()->size());
  Index i = 0;
  for (const auto &r : rows) {
    Index j = 0;
    for (double v : r) {
      m(i, j++) = v;
    }
    ++i;
  }
  return m;
}

} // namespace

TEST_SUITE("ou_model") {

TEST_CASE("standard model has unit invariant covariance") {
  const OUModel m = buildModel(mat({{2}}), mat({{-1}}));
  CHECK(m.Qinf()(0, 0) == doctest::Approx(1).epsilon(1e-14));
  CHECK(m.lyapunovResidual() <= 1e-12);
  CHECK(m.spectralAbscissa() == doctest::Approx(-1));
}

TEST_CASE("unstable and malformed models are rejected") {
  auto code = [](auto &&build) {
    try {
      build();
    } catch (const Error &e) {
      return e.code();
    }
    return ErrorCode::Parse;
  };
  CHECK((code([] { buildModel(mat({{1}}), mat({{1}})); }) == ErrorCode::NotStable));
  CHECK((code([] { buildModel(mat({{-1}}), mat({{-1}})); }) == ErrorCode::NotSPD));
  CHECK((code([] { buildModel(mat({{1, 0.5}, {0, 1}}), mat({{-1, 0}, {0, -1}})); }) ==
         ErrorCode::NotSPD));
  CHECK((code([] { buildModel(mat({{1}}), mat({{-1, 0}, {0, -1}})); }) ==
         ErrorCode::DimensionMismatch));
}

TEST_CASE("Qinf matches the defining integral at a long horizon") {
  const OUModel m = randomStableModel(3, 17);
  CHECK(relativeError(m.Qinf(), qtOracle(m, 50)) <= 1e-8);
}

TEST_CASE("Q_t closed form and series agree with quadrature") {
  const OUModel s = standardModel(1);
  CHECK(covarianceQt(s, std::log(2.0))(0, 0) == doctest::Approx(0.75).epsilon(1e-14));

  const OUModel m = randomStableModel(2, 5);
  const Matrix oracle = qtOracle(m, 0.7);
  CHECK(relativeError(covarianceQt(m, 0.7), oracle) <= 1e-8);
  CHECK(relativeError(covarianceQtSeries(m, 0.7), oracle) <= 1e-8);
  CHECK(relativeError(covarianceQtClosedForm(m, 0.7), oracle) <= 1e-8);
}

TEST_CASE("Q_t / t tends to Q") {
  const OUModel m = randomStableModel(2, 9);
  CHECK(relativeError(covarianceQt(m, 1e-3) / 1e-3, m.Q()) <= 1e-2);
  CHECK(relativeError(covarianceQt(m, 1e-4) / 1e-4, m.Q()) <= 1e-3);
}

TEST_CASE("D_t is a group") {
  const OUModel s = standardModel(1);
  CHECK(groupDt(s, 1)(0, 0) == doctest::Approx(std::numbers::e).epsilon(1e-14));
  const OUModel m = randomStableModel(2, 3);
  CHECK((groupDt(m, 0) - Matrix::Identity(2, 2)).norm() <= 1e-14);
  CHECK((groupDt(m, 0.3) * groupDt(m, 0.5) - groupDt(m, 0.8)).norm() <= 1e-10);
  // Independent form Qinf e^{-tB^T} Qinf^{-1}.
  const Matrix oracle =
      m.Qinf() * expOracle(-0.4 * m.B().transpose()) * m.Qinf().inverse();
  CHECK(relativeError(groupDt(m, 0.4), oracle) <= 1e-12);
}

TEST_CASE("R and the Q-norm") {
  const OUModel s = standardModel(1);
  CHECK(quadraticR(s, Vector::Zero(1)) == 0);
  CHECK(normQ(s, Vector::Zero(1)) == 0);
  CHECK(quadraticR(s, Vector::Constant(1, 2)) == doctest::Approx(2));
  CHECK(normQ(s, Vector::Constant(1, 2)) == doctest::Approx(2));

  // Qinf = diag(1, 4): Q = diag(2, 8) with B = -I.
  const OUModel d = buildModel(mat({{2, 0}, {0, 8}}), mat({{-1, 0}, {0, -1}}));
  Vector x(2);
  x << 0, 2;
  CHECK(normQ(d, x) == doctest::Approx(1));
  CHECK(quadraticR(d, x) == doctest::Approx(0.5));
}

TEST_CASE("gamma densities") {
  const OUModel s = standardModel(1);
  CHECK(gammaDensity(s, kInfiniteTime, Vector::Zero(1)) ==
        doctest::Approx(1 / std::sqrt(2 * std::numbers::pi)).epsilon(1e-14));

  const OUModel m = randomStableModel(2, 4);
  const double ref = gammaDensity(m, kInfiniteTime, Vector::Zero(2));
  for (std::uint64_t i = 0; i < 100; ++i) {
    PointStream rng(8, i);
    const Vector x = rng.uniformBox(2, 3);
    const double ratio = gammaDensity(m, kInfiniteTime, x) /
                         std::exp(-quadraticR(m, x));
    CHECK(ratio == doctest::Approx(ref).epsilon(1e-12));
  }

  // Importance-sampled mass of gamma_t from a standard normal proposal
  // scaled to twice the covariance.
  const double t = 0.5;
  const Matrix qt = covarianceQt(m, t);
  const Matrix l = (2 * qt).llt().matrixL();
  const double proposalNorm =
      1 / (2 * std::numbers::pi * std::sqrt((2 * qt).determinant()));
  const std::size_t count = 20000;
  double sum = 0, sumSq = 0;
  for (std::size_t i = 0; i < count; ++i) {
    PointStream rng(9, i);
    const Vector z = rng.normalVector(2);
    const Vector x = l * z;
    const double w = gammaDensity(m, t, x) /
                     (proposalNorm * std::exp(-0.5 * z.squaredNorm()));
    sum += w;
    sumSq += w * w;
  }
  const double mean = sum / count;
  const double sigma = std::sqrt((sumSq / count - mean * mean) / count);
  CHECK(std::abs(mean - 1) <= 3 * sigma);
}

TEST_CASE("generator on simple functions") {
  const OUModel s = standardModel(1);
  ScalarField one{[](const Vector &) { return 1.0; }, {}, {}};
  CHECK(applyGenerator(s, one, Vector::Constant(1, 0.7)) == doctest::Approx(0).scale(1));
  ScalarField square{[](const Vector &x) { return x(0) * x(0); },
                     [](const Vector &x) { return Vector::Constant(1, 2 * x(0)); },
                     [](const Vector &) { return Matrix::Constant(1, 1, 2); }};
  for (double x : {-1.0, 0.0, 0.5, 2.0}) {
    CHECK(applyGenerator(s, square, Vector::Constant(1, x)) ==
          doctest::Approx(2 - 2 * x * x));
  }
  // Without derivatives the finite-difference fallback is used.
  ScalarField bare{square.value, {}, {}};
  CHECK(applyGenerator(s, bare, Vector::Constant(1, 0.5)) ==
        doctest::Approx(1.5).epsilon(1e-6));
}

TEST_CASE("JSON round trip") {
  const OUModel m = randomStableModel(2, 12);
  const OUModel back = modelFromJson(modelToJson(m));
  CHECK((back.Q() - m.Q()).norm() == 0);
  CHECK((back.B() - m.B()).norm() == 0);
  CHECK_THROWS_AS(modelFromJson("{\"n\": 2, \"Q\": [1], \"B\": [-1]}"), Error);
  CHECK_THROWS_AS(modelFromJson("not json"), Error);
}

}
