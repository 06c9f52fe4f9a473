#include "oulab/mehler_kernel.hpp"

#include "oulab/linalg.hpp"
#include "oulab/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace oulab {

namespace {

// Stack-allocated vectors keep the hot kernel evaluations off the heap.
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 8, 1>;
constexpr Index kSmallDim = 8;

void checkPoint(const OUModel &model, const KernelPoint &p) {
  if (!(p.t > 0)) {
    throw Error(ErrorCode::NonPositiveTime, "kernel time must be positive");
  }
  if (p.x.size() != model.dim() || p.u.size() != model.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "point dimension mismatch");
  }
  if (!allFinite(p.x) || !allFinite(p.u) || !std::isfinite(p.t)) {
    throw Error(ErrorCode::NonFinite, "kernel point not finite");
  }
}

template <typename V>
double logKImpl(const OUModel &model, const Matrix &expTB, const Matrix &qtInv,
                double a, const Vector &x, const Vector &u) {
  V v = u;
  v.noalias() -= expTB * x;
  V pv, qu;
  pv.noalias() = qtInv * v;
  qu.noalias() = model.QinfInv() * u;
  return a + 0.5 * u.dot(qu) - 0.5 * v.dot(pv);
}

} // namespace

KernelSlice::KernelSlice(const OUModel &model, double t)
    : model_(&model), t_(t) {
  if (!(t > 0) || !std::isfinite(t)) {
    throw Error(ErrorCode::NonPositiveTime, "kernel time must be positive");
  }
  const Index n = model.dim();
  const Matrix id = Matrix::Identity(n, n);
  expTB_ = expB(model, t);
  qt_ = covarianceQt(model, t);
  Eigen::LLT<Matrix> llt(qt_);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotSPD, "Q_t is not positive definite");
  }
  qtInv_ = llt.solve(id);
  qtInv_ = 0.5 * (qtInv_ + qtInv_.transpose()).eval();
  logDetQt_ = 2 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  dt_ = groupDt(model, t);
  dtInv_ = groupDt(model, -t);
  // Q_t^{-1} - Qinf^{-1} = Q_t^{-1} (Qinf - Q_t) Qinf^{-1}, and
  // Qinf - Q_t = e^{tB} Qinf e^{tB^T} exactly; the difference form
  // cancels to zero once Q_t rounds to Qinf.
  mt_ = qtInv_ * (expTB_ * model.Qinf() * expTB_.transpose()) *
        model.QinfInv();
  mt_ = 0.5 * (mt_ + mt_.transpose()).eval();

  const Matrix qtDot = expTB_ * model.Q() * expTB_.transpose();
  mtDot_ = -qtInv_ * qtDot * qtInv_;
  mtDot_ = 0.5 * (mtDot_ + mtDot_.transpose()).eval();
  bExpTB_ = model.B() * expTB_;
  a_ = 0.5 * (model.logDetQinf() - logDetQt_);
  aDot_ = -0.5 * (qtInv_ * qtDot).trace();
}

double KernelSlice::logK(const Vector &x, const Vector &u) const {
  if (x.size() <= kSmallDim) {
    return logKImpl<SmallVector>(*model_, expTB_, qtInv_, a_, x, u);
  }
  return logKImpl<Vector>(*model_, expTB_, qtInv_, a_, x, u);
}

double KernelSlice::logKTilde(const Vector &x, const Vector &u) const {
  return logK(x, u) - 0.5 * model_->logDetQinf() - quadraticR(*model_, x);
}

// With v = u - e^{tB} x and P = Q_t^{-1}:
//   d/dt log K = a' - v.P'v / 2 + Pv.(B e^{tB} x),   P' = -P Q_t' P.
std::pair<double, double> KernelSlice::logKAndRate(const Vector &x,
                                                   const Vector &u) const {
  if (x.size() > kSmallDim) {
    return {logK(x, u), logRate(x, u)};
  }
  SmallVector v = u;
  v.noalias() -= expTB_ * x;
  SmallVector pv, dpv, bx, qu;
  pv.noalias() = qtInv_ * v;
  dpv.noalias() = mtDot_ * v;
  bx.noalias() = bExpTB_ * x;
  qu.noalias() = model_->QinfInv() * u;
  const double lk = a_ + 0.5 * u.dot(qu) - 0.5 * v.dot(pv);
  const double rate = aDot_ - 0.5 * v.dot(dpv) + pv.dot(bx);
  return {lk, rate};
}

double KernelSlice::logRate(const Vector &x, const Vector &u) const {
  if (x.size() <= kSmallDim) {
    return logKAndRate(x, u).second;
  }
  const Vector v = u - expTB_ * x;
  return aDot_ - 0.5 * v.dot(mtDot_ * v) + (qtInv_ * v).dot(bExpTB_ * x);
}

Vector KernelSlice::rVector(const Vector &x, const Vector &u) const {
  return mt_ * u - qtInv_ * (expTB_ * x);
}

Vector KernelSlice::rVectorRate(const Vector &x, const Vector &u) const {
  const Vector v = u - expTB_ * x;
  return mtDot_ * v - qtInv_ * (bExpTB_ * x);
}

double logMehlerK(const OUModel &model, const KernelPoint &p) {
  checkPoint(model, p);
  return KernelSlice(model, p.t).logK(p.x, p.u);
}

double mehlerK(const OUModel &model, const KernelPoint &p) {
  return std::exp(logMehlerK(model, p));
}

double mehlerKTilde(const OUModel &model, const KernelPoint &p) {
  checkPoint(model, p);
  return std::exp(KernelSlice(model, p.t).logKTilde(p.x, p.u));
}

double convKernel(const OUModel &model, const Vector &y, double t) {
  if (!(t > 0)) {
    throw Error(ErrorCode::NonPositiveTime, "kernel time must be positive");
  }
  const double n = static_cast<double>(model.dim());
  const double quad = y.dot(model.QInv() * y);
  return std::exp(-0.5 * model.logDetQ() - 0.5 * n * std::log(t) -
                  0.5 * quad / t);
}

double normalizedConvKernel(const OUModel &model, const Vector &y, double t) {
  const double n = static_cast<double>(model.dim());
  return convKernel(model, y, t) *
         std::pow(2 * std::numbers::pi, -0.5 * n);
}

DerivativeEstimate mehlerKdot(const OUModel &model, const KernelPoint &p) {
  checkPoint(model, p);
  if (p.t < 1e-12) {
    throw Error(ErrorCode::StepUnderflow, "t below 1e-12");
  }
  const auto f = [&](double t) { return KernelSlice(model, t).logK(p.x, p.u); };
  const double h = 1e-4 * p.t;
  const double d1 = (f(p.t + h) - f(p.t - h)) / (2 * h);
  const double d2 = (f(p.t + h / 2) - f(p.t - h / 2)) / h;
  const double rich = (4 * d2 - d1) / 3;
  const double k = std::exp(f(p.t));
  return {k * rich, k * std::abs(rich - d2)};
}

double centralDifferenceKdot(const OUModel &model, const KernelPoint &p,
                             double h) {
  checkPoint(model, p);
  if (!(h > 0) || h >= p.t) {
    throw Error(ErrorCode::InvalidArgument, "need 0 < h < t");
  }
  const auto k = [&](double t) {
    return std::exp(KernelSlice(model, t).logK(p.x, p.u));
  };
  return (k(p.t + h) - k(p.t - h)) / (2 * h);
}

double mehlerKdotExact(const OUModel &model, const KernelPoint &p) {
  checkPoint(model, p);
  const auto [lk, rate] = KernelSlice(model, p.t).logKAndRate(p.x, p.u);
  return std::exp(lk) * rate;
}

double spaceDerivativeIdentityCheck(const OUModel &model, const KernelPoint &p,
                                    Index l) {
  checkPoint(model, p);
  if (l < 0 || l >= model.dim()) {
    throw Error(ErrorCode::InvalidArgument, "coordinate index out of range");
  }
  const KernelSlice slice(model, p.t);
  const double h = 1e-3 * std::max(1.0, std::abs(p.u(l)));
  const auto f = [&](double du) {
    Vector v = p.u;
    v(l) += du;
    return slice.logK(p.x, v);
  };
  const double d1 = (f(h) - f(-h)) / (2 * h);
  const double d2 = (f(h / 2) - f(-h / 2)) / h;
  const double k = std::exp(slice.logK(p.x, p.u));
  const double fd = k * (4 * d2 - d1) / 3;
  const double kr = k * slice.rVector(p.x, p.u)(l);
  return std::abs(fd + kr) / std::max(1.0, std::abs(kr));
}

// ---------------------------------------------------------------- zeros

namespace {

std::vector<double> logGrid(double lo, double hi, int points) {
  std::vector<double> g(static_cast<std::size_t>(points));
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < points; ++i) {
    g[static_cast<std::size_t>(i)] =
        i + 1 == points ? hi : std::exp(llo + (lhi - llo) * i / (points - 1));
  }
  return g;
}

// Below this |t dlogK/dt| the sign is treated as undetermined.
constexpr double kRateFloor = 1e-13;

int rateSign(double rate, double t) {
  const double s = rate * t;
  return s > kRateFloor ? 1 : (s < -kRateFloor ? -1 : 0);
}

} // namespace

ZeroScanner::ZeroScanner(const OUModel &model, double tLo, double tHi,
                         int gridPoints)
    : model_(&model), tLo_(tLo), tHi_(tHi) {
  if (!(tLo > 0) || !(tHi > tLo) || gridPoints < 2) {
    throw Error(ErrorCode::InvalidArgument, "bad zero-scan interval");
  }
  const std::vector<double> base = logGrid(tLo, tHi, gridPoints);
  base_.reserve(base.size());
  fine_.reserve(2 * base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    base_.emplace_back(model, base[i]);
    fine_.push_back(base_.back());
    if (i + 1 < base.size()) {
      fine_.emplace_back(model, std::sqrt(base[i] * base[i + 1]));
    }
  }
}

std::vector<double> ZeroScanner::signChangesOnGrid(const Vector &x,
                                                   const Vector &u,
                                                   bool doubled) const {
  const auto &grid = doubled ? fine_ : base_;
  std::vector<double> brackets;
  int last = 0;
  double lastT = 0;
  for (const KernelSlice &s : grid) {
    const int sg = rateSign(s.logKAndRate(x, u).second, s.t());
    if (sg == 0) {
      continue;
    }
    if (last != 0 && sg != last) {
      brackets.push_back(lastT);
      brackets.push_back(s.t());
    }
    last = sg;
    lastT = s.t();
  }
  return brackets;
}

int ZeroScanner::countOnGrid(const Vector &x, const Vector &u,
                             bool doubled) const {
  return static_cast<int>(signChangesOnGrid(x, u, doubled).size() / 2);
}

double ZeroScanner::bisect(const Vector &x, const Vector &u, double lo,
                           double hi) const {
  const int sLo = rateSign(KernelSlice(*model_, lo).logRate(x, u), lo);
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    const double r = KernelSlice(*model_, mid).logRate(x, u);
    if ((r > 0 ? 1 : -1) == sLo) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

ZeroCount ZeroScanner::count(const Vector &x, const Vector &u,
                             bool refine) const {
  ZeroCount out;
  const std::vector<double> br = signChangesOnGrid(x, u, false);
  out.count = static_cast<int>(br.size() / 2);
  out.countDoubled = countOnGrid(x, u, true);
  out.unstable = out.count != out.countDoubled;
  if (refine) {
    for (std::size_t i = 0; i < br.size(); i += 2) {
      out.zeros.push_back(bisect(x, u, br[i], br[i + 1]));
    }
  }
  return out;
}

ZeroCount countKdotZeros(const OUModel &model, const Vector &x,
                         const Vector &u, double tLo, double tHi) {
  if (!(tHi <= 1) || !(tLo > 0)) {
    throw Error(ErrorCode::InvalidArgument, "scan interval must lie in (0,1]");
  }
  return ZeroScanner(model, tLo, tHi).count(x, u, true);
}

FtcBound ftcVariationBound(const OUModel &model, const Vector &x,
                           const Vector &u) {
  if ((x - u).norm() == 0) {
    throw Error(ErrorCode::Coincident, "FTC bound needs x != u");
  }
  constexpr double tLo = 1e-8;
  FtcBound out;
  out.zeros = countKdotZeros(model, x, u, tLo, 1.0);
  const auto kAt = [&](double t) {
    return std::exp(KernelSlice(model, t).logK(x, u));
  };
  std::vector<double> pts{tLo};
  pts.insert(pts.end(), out.zeros.zeros.begin(), out.zeros.zeros.end());
  pts.push_back(1.0);

  // Below tLo the kernel rises monotonically from 0, contributing K(tLo).
  const double k0 = kAt(tLo);
  out.lhs = k0;
  out.telescoped = k0;
  out.rhs = 2 * (k0 + kAt(1.0));
  for (double z : out.zeros.zeros) {
    out.rhs += 2 * kAt(z);
  }
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const auto g = [&](double s) {
      const double t = std::exp(s);
      const auto [lk, rate] = KernelSlice(model, t).logKAndRate(x, u);
      return std::exp(lk) * std::abs(rate) * t;
    };
    out.lhs +=
        integrateAdaptive(g, std::log(pts[i]), std::log(pts[i + 1]), 1e-10)
            .value;
    out.telescoped += std::abs(kAt(pts[i + 1]) - kAt(pts[i]));
  }
  for (double t : logGrid(tLo, 1.0, 1000)) {
    out.supK = std::max(out.supK, kAt(t));
  }
  return out;
}

// ----------------------------------------------------------- calibration

std::string toString(BoundKind kind) {
  switch (kind) {
  case BoundKind::Litet:
    return "litet";
  case BoundKind::DotKeps:
    return "dotKeps";
  case BoundKind::DotK1:
    return "dotK1";
  case BoundKind::Ineq100:
    return "ineq100";
  }
  return "?";
}

BoundKind parseBoundKind(const std::string &name) {
  for (BoundKind k : {BoundKind::Litet, BoundKind::DotKeps, BoundKind::DotK1,
                      BoundKind::Ineq100}) {
    if (toString(k) == name) {
      return k;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown bound " + name);
}

double naturalRate(const OUModel &model, BoundKind kind,
                   const CalibrationSpec &spec) {
  double best = std::numeric_limits<double>::infinity();
  const bool small = kind == BoundKind::Litet || kind == BoundKind::DotKeps;
  const std::vector<double> grid =
      small ? logGrid(std::min(spec.tMin, 1e-6), 1.0, 400)
            : logGrid(1.0, spec.tMax, 400);
  for (double t : grid) {
    const KernelSlice s(model, t);
    // D_t^T M_t D_t = Qinf^{-1} + e^{tB^T} Q_t^{-1} e^{tB}.
    const Matrix m =
        small ? Matrix(t * s.Mt())
              : Matrix(model.QinfInv() +
                       s.expTB().transpose() * s.QtInv() * s.expTB());
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()),
                                             Eigen::EigenvaluesOnly);
    best = std::min(best, es.eigenvalues().minCoeff());
  }
  return 0.5 * best;
}

namespace {

struct CalibrationSample {
  double logBase = -std::numeric_limits<double>::infinity();
  double exponent = 0;  // multiplies c in the log ratio
  double t = 0;
  double backward = 0;  // |D_{-t} u|, large-t bound only
};

double logRatio(BoundKind kind, const CalibrationSample &s, double c) {
  double v = s.logBase + c * s.exponent;
  if (kind == BoundKind::DotK1) {
    v -= std::log(s.backward + std::exp(-c * s.t));
  }
  return v;
}

std::pair<double, double> maxRatios(BoundKind kind,
                                    const std::vector<CalibrationSample> &all,
                                    double c) {
  double full = -std::numeric_limits<double>::infinity(), half = full;
  for (std::size_t i = 0; i < all.size(); ++i) {
    full = std::max(full, logRatio(kind, all[i], c));
    if (i + 1 == all.size() / 2) {
      half = full;
    }
  }
  return {std::exp(full), std::exp(half)};
}

bool isStable(const std::pair<double, double> &r) {
  return std::isfinite(r.first) && r.first <= 1.1 * r.second;
}

std::vector<CalibrationSample> drawSamples(const OUModel &model,
                                           BoundKind kind,
                                           const CalibrationSpec &spec) {
  const Index n = model.dim();
  const double nd = static_cast<double>(n);
  std::vector<CalibrationSample> out(spec.sample.size);

  // The time integral of the last bound runs on one shared grid.
  std::vector<KernelSlice> slices;
  std::vector<double> grid;
  if (kind == BoundKind::Ineq100) {
    grid = logGrid(1.0, spec.tMax, 4000);
    for (double t : grid) {
      slices.emplace_back(model, t);
    }
  }

  for (std::size_t i = 0; i < out.size(); ++i) {
    PointStream rng(spec.sample.seed, i);
    CalibrationSample &s = out[i];
    const Vector x = rng.uniformBox(n, spec.sample.radius);
    const double rx = quadraticR(model, x);
    switch (kind) {
    case BoundKind::Litet:
    case BoundKind::DotKeps: {
      const double t = spec.tMin * std::pow(1 / spec.tMin, rng.uniform());
      const double scale = std::pow(10.0, rng.uniform(-1, 1));
      const KernelSlice sl(model, t);
      const Vector u =
          sl.Dt() * x + std::sqrt(t) * scale * rng.normalVector(n);
      const auto [lk, rate] = sl.logKAndRate(x, u);
      const Vector w = u - sl.Dt() * x;
      s.t = t;
      s.exponent = w.squaredNorm() / t;
      if (kind == BoundKind::Litet) {
        s.logBase = lk - rx + 0.5 * nd * std::log(t);
      } else {
        s.logBase = lk + std::log(std::abs(rate)) - rx +
                    0.5 * nd * std::log(t) -
                    std::log(1 / t + x.norm() / std::sqrt(t));
      }
      break;
    }
    case BoundKind::DotK1: {
      const double t = std::pow(spec.tMax, rng.uniform());
      const Vector u = rng.uniformBox(n, spec.sample.radius);
      const KernelSlice sl(model, t);
      const auto [lk, rate] = sl.logKAndRate(x, u);
      const Vector back = sl.DtInverse() * u;
      s.t = t;
      s.exponent = (back - x).squaredNorm();
      s.backward = back.norm();
      s.logBase = lk + std::log(std::abs(rate)) - rx;
      break;
    }
    case BoundKind::Ineq100: {
      const Vector u = rng.uniformBox(n, spec.sample.radius);
      double integral = 0, prev = 0;
      for (std::size_t k = 0; k < slices.size(); ++k) {
        const auto [lk, rate] = slices[k].logKAndRate(x, u);
        const double v = std::exp(lk - rx) * std::abs(rate);
        if (k > 0) {
          integral += 0.5 * (v + prev) * (grid[k] - grid[k - 1]);
        }
        prev = v;
      }
      s.logBase = std::log(integral);
      break;
    }
    }
  }
  return out;
}

std::string gridDescription(BoundKind kind, const CalibrationSpec &spec) {
  const std::string box = "x in [-" + std::to_string(spec.sample.radius) +
                          "," + std::to_string(spec.sample.radius) + "]^n";
  switch (kind) {
  case BoundKind::Litet:
  case BoundKind::DotKeps:
    return box + ", t log-uniform on [" + std::to_string(spec.tMin) +
           ",1], u = D_t x + sqrt(t) s z, s log-uniform on [0.1,10]";
  case BoundKind::DotK1:
    return box + ", u in the same box, t log-uniform on [1," +
           std::to_string(spec.tMax) + "]";
  case BoundKind::Ineq100:
    return box + ", u in the same box, trapezoid on 4000 log-spaced t in [1," +
           std::to_string(spec.tMax) + "]";
  }
  return "";
}

} // namespace

BoundCalibration calibrateBound(const OUModel &model, BoundKind kind,
                                const CalibrationSpec &spec) {
  if (spec.sample.size < 2) {
    throw Error(ErrorCode::InvalidArgument, "calibration needs >= 2 samples");
  }
  BoundCalibration out;
  out.kind = kind;
  out.spec = spec;
  out.grid = gridDescription(kind, spec);
  out.naturalRate = kind == BoundKind::Ineq100 ? 0 : naturalRate(model, kind, spec);
  const std::vector<CalibrationSample> samples = drawSamples(model, kind, spec);

  double c = 0;
  if (kind == BoundKind::Ineq100) {
    c = 0;
  } else if (spec.rate) {
    c = *spec.rate;
    if (!(c > 0)) {
      throw Error(ErrorCode::InvalidArgument, "rate must be positive");
    }
    // Above the natural rate the Gaussian factor decays faster than the
    // kernel somewhere, so the ratio is unbounded even if a finite sample
    // happens to look stable.
    if (c > out.naturalRate) {
      throw Error(ErrorCode::RateTooLarge,
                  "rate " + std::to_string(c) + " exceeds the natural rate " +
                      std::to_string(out.naturalRate));
    }
    if (!isStable(maxRatios(kind, samples, c))) {
      throw Error(ErrorCode::RateTooLarge,
                  "bound ratio not sample-stable at c = " + std::to_string(c));
    }
  } else {
    const double top = out.naturalRate * (1 - 1e-9);
    if (isStable(maxRatios(kind, samples, top))) {
      c = top;
    } else {
      double lo = 0, hi = top;
      if (!isStable(maxRatios(kind, samples, 1e-3 * top))) {
        throw Error(ErrorCode::RateTooLarge, "no sample-stable rate found");
      }
      lo = 1e-3 * top;
      for (int it = 0; it < 50; ++it) {
        const double mid = 0.5 * (lo + hi);
        (isStable(maxRatios(kind, samples, mid)) ? lo : hi) = mid;
      }
      c = lo;
    }
  }
  const auto r = maxRatios(kind, samples, c);
  out.rate = c;
  out.maxRatio = r.first;
  out.halfSampleRatio = r.second;
  out.stable = isStable(r);
  return out;
}

// ----------------------------------------------------------- integrals

ProbeReport kernelBoundsProbe(const OUModel &model,
                              const std::vector<BoundKind> &kinds,
                              const CalibrationSpec &spec) {
  if (kinds.empty()) {
    throw Error(ErrorCode::InvalidArgument, "no bound selected");
  }
  ProbeReport report("kernel_bounds",
                     "Gaussian upper bounds for K_t and its time derivative "
                     "hold with a calibrated exponent constant");
  report.setSeed(spec.sample.seed);
  report.setInput("samples", static_cast<double>(spec.sample.size));
  report.setInput("radius", spec.sample.radius);
  report.setInput("t_min", spec.tMin);
  report.setInput("t_max", spec.tMax);
  if (spec.rate) {
    report.setInput("rate", *spec.rate);
  }
  Table table{report.claim(),
              {"bound", "rate", "natural_rate", "max_ratio", "half_sample_ratio"},
              {}};
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    const BoundCalibration c = calibrateBound(model, kinds[i], spec);
    const std::string key = toString(kinds[i]);
    report.setStatistic(key + "_rate", c.rate);
    report.setStatistic(key + "_natural_rate", c.naturalRate);
    report.setStatistic(key + "_max_ratio", c.maxRatio);
    report.setStatistic(key + "_half_sample_ratio", c.halfSampleRatio);
    report.setPass(key + "_stable", c.stable);
    table.rows.push_back({static_cast<double>(i), c.rate, c.naturalRate,
                          c.maxRatio, c.halfSampleRatio});
  }
  report.addTable("kernel_bounds", std::move(table));
  return report;
}

IntegralLemma integralLemmaCheck(const OUModel &model,
                                 const PartitionOfUnity &pou, double p,
                                 double r, double delta, const Vector &x,
                                 const Vector &u) {
  if (p < 0 || r < 0 || !(p + r / 2 > 1)) {
    throw Error(ErrorCode::InvalidArgument, "need p, r >= 0 and p + r/2 > 1");
  }
  if (!(delta > 0)) {
    throw Error(ErrorCode::InvalidArgument, "delta must be positive");
  }
  const double dist = (u - x).norm();
  if (dist == 0) {
    throw Error(ErrorCode::Coincident, "x = u");
  }
  if (pou.eta(x, u) == 0) {
    throw Error(ErrorCode::EtaZero, "eta(x,u) = 0");
  }
  const double logXr = r == 0 ? 0.0 : r * std::log(x.norm());
  const auto g = [&](double s) {
    const double t = std::exp(s);
    const double d2 = (u - groupDt(model, t) * x).squaredNorm();
    return std::exp((1 - p) * s - delta * d2 / t + logXr);
  };
  IntegralLemma out;
  for (int k = -16; k < 0; ++k) {
    out.lhs += integrateAdaptive(g, k * std::log(10.0), (k + 1) * std::log(10.0),
                                 1e-10)
                   .value;
  }
  out.rhs = std::pow(dist, 2 - 2 * p - r);
  out.ratio = out.lhs / out.rhs;
  return out;
}

double lemma41Check(const OUModel &model, double delta, const Vector &x,
                    const Vector &u, double tMax) {
  if (!(delta > 0) || !(tMax > 1)) {
    throw Error(ErrorCode::InvalidArgument, "need delta > 0 and tMax > 1");
  }
  const auto g = [&](double t) {
    const Vector back = groupDt(model, -t) * u;
    return std::exp(-delta * (back - x).squaredNorm()) * back.norm();
  };
  const double decay = -model.spectralAbscissa();
  const double tail = (groupDt(model, -tMax) * u).norm() / decay;
  if (tail > 1e-8) {
    throw Error(ErrorCode::TailNotConverged,
                "tail estimate " + std::to_string(tail) + " at tMax");
  }
  double total = 0, a = 1;
  while (a < tMax) {
    const double b = std::min(2 * a, tMax);
    total += integrateAdaptive(g, a, b, 1e-12).value;
    a = b;
  }
  return total;
}

std::vector<KernelTraceRow> kernelTrace(const OUModel &model, const Vector &x,
                                        const Vector &u,
                                        const std::vector<double> &times) {
  std::vector<KernelTraceRow> rows;
  rows.reserve(times.size());
  for (double t : times) {
    const auto [lk, rate] = KernelSlice(model, t).logKAndRate(x, u);
    rows.push_back({t, std::exp(lk), std::exp(lk) * rate});
  }
  return rows;
}

} // namespace oulab
