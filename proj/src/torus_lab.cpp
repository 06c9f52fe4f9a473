#include "oulab/torus_lab.hpp"

#include "oulab/mehler_kernel.hpp"
#include "oulab/parallel.hpp"
#include "oulab/rho_variation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numbers>

namespace oulab::torus {

namespace {

constexpr double kPi = std::numbers::pi;

double normalCdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

void checkRademacherIndex(int k) {
  if (k < 1 || k > DyadicPoint::kBits) {
    throw Error(ErrorCode::InvalidArgument, "Rademacher index out of range");
  }
}

void checkN(int N, int lo, int hi) {
  if (N < lo) {
    throw Error(ErrorCode::InvalidArgument, "N below " + std::to_string(lo));
  }
  if (N > hi) {
    throw Error(ErrorCode::CostGuard, "N above " + std::to_string(hi));
  }
}

double quantile(const std::vector<double> &sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= sorted.size()) {
    return sorted.back();
  }
  const double frac = pos - static_cast<double>(i);
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

double logLog(int N) { return std::log(std::log(static_cast<double>(N))); }

const std::vector<double> &measureGrid() {
  static const std::vector<double> grid{0.1, 0.2, 0.3, 0.4, 0.5,
                                        0.6, 0.7, 0.8, 0.9, 1.0};
  return grid;
}

/// Fraction of v2 values above c sqrt(N log log N); NaN for N < 3.
double exceedance(const std::vector<double> &v2, int N, double c) {
  const double ll = logLog(N);
  if (!(ll > 0)) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double threshold = c * std::sqrt(N * ll);
  const auto above = std::count_if(v2.begin(), v2.end(),
                                   [&](double v) { return v > threshold; });
  return static_cast<double>(above) / static_cast<double>(v2.size());
}

std::vector<double> sampleChain(int N, ChainOperator op, std::size_t samples,
                                std::uint64_t seed,
                                std::vector<double> *points = nullptr) {
  std::vector<double> v2(samples);
  if (points) {
    points->resize(samples);
  }
  parallelFor(samples, [&](std::size_t i) {
    PointStream rng(seed, i);
    const DyadicPoint x = DyadicPoint::sample(rng);
    v2[i] = chainVariation(N, op, x);
    if (points) {
      (*points)[i] = x.value();
    }
  });
  return v2;
}

} // namespace

// ------------------------------------------------------------ Rademacher

double DyadicPoint::value() const {
  return std::ldexp(static_cast<double>(numerator), -kBits);
}

int DyadicPoint::digit(int k) const {
  checkRademacherIndex(k);
  return static_cast<int>((numerator >> (kBits - k)) & 1U);
}

DyadicPoint DyadicPoint::sample(PointStream &rng) {
  return {(rng.bits() >> (64 - kBits)) | 1U};
}

int rademacher(int k, double x) {
  if (k < 1) {
    throw Error(ErrorCode::InvalidArgument, "Rademacher index must be >= 1");
  }
  if (!(x >= 0 && x < 1)) {
    throw Error(ErrorCode::InvalidArgument, "x must lie in [0,1)");
  }
  const auto slot = static_cast<long long>(std::floor(std::ldexp(x, k)));
  return (slot & 1) ? -1 : 1;
}

int rademacher(int k, DyadicPoint x) { return x.digit(k) ? -1 : 1; }

int qk(int k, double u) {
  if (!(u >= -1 && u < 2)) {
    return 0;
  }
  return rademacher(k, u - std::floor(u));
}

double tN(int N, double x) {
  double s = 0;
  for (int k = 2 * N + 1; k <= 3 * N; ++k) {
    s += rademacher(k, x);
  }
  return s;
}

double gN(int N, double u) {
  double s = 0;
  for (int k = 2 * N + 1; k <= 3 * N; ++k) {
    s += qk(k, u);
  }
  return s;
}

// ------------------------------------------------------------ A_l

double gaussianStepAverage(const std::function<double(long long)> &slotValue,
                           double width, double lo, double hi, double mean,
                           double sigma) {
  if (!(width > 0) || !(sigma > 0)) {
    throw Error(ErrorCode::InvalidArgument, "width and sigma must be positive");
  }
  const double a = std::max(lo, mean - 12 * sigma);
  const double b = std::min(hi, mean + 12 * sigma);
  if (!(b > a)) {
    return 0;
  }
  const auto first = static_cast<long long>(std::floor(a / width));
  const auto last = static_cast<long long>(std::ceil(b / width)) - 1;
  if (last - first > (1LL << 24)) {
    throw Error(ErrorCode::CostGuard, "too many slots in the Gaussian window");
  }
  double sum = 0;
  double left = normalCdf((a - mean) / sigma);
  for (long long j = first; j <= last; ++j) {
    const double edge = std::min(b, static_cast<double>(j + 1) * width);
    const double right = normalCdf((edge - mean) / sigma);
    sum += slotValue(j) * (right - left);
    left = right;
  }
  return sum;
}

double gaussianRademacher(int k, double mean, double sigma) {
  checkRademacherIndex(k);
  return gaussianStepAverage(
      [](long long j) { return (j & 1) ? -1.0 : 1.0; }, std::ldexp(1.0, -k),
      -1.0, 2.0, mean, sigma);
}

double gaussianAverageGN(int N, double mean, double sigma) {
  const bool inside = mean - 12 * sigma > -1 && mean + 12 * sigma < 2;
  double sum = 0;
  for (int k = 2 * N + 1; k <= 3 * N; ++k) {
    if (inside && std::ldexp(1.0, -k) <= sigma / 4) {
      continue;
    }
    sum += gaussianRademacher(k, mean, sigma);
  }
  return sum;
}

double applyA(int N, int l, double x) {
  checkN(N, 1, 17);
  if (l < 1) {
    throw Error(ErrorCode::InvalidArgument, "level must be >= 1");
  }
  return gaussianAverageGN(N, x, std::ldexp(1.0, -l));
}

// ------------------------------------------------------------ D_l

double rademacherPrimitive(int k, double y) {
  checkRademacherIndex(k);
  const double half = std::ldexp(1.0, -k);
  double r = std::fmod(y, 2 * half);
  if (r < 0) {
    r += 2 * half;
  }
  return half - std::abs(r - half);
}

double meanValueRademacher(int k, int l, double x) {
  const double h = std::ldexp(1.0, -l);
  return std::ldexp(rademacherPrimitive(k, x + h) - rademacherPrimitive(k, x - h),
                    l - 1);
}

double applyD(int N, int l, double x, Domain domain) {
  checkN(N, 1, 17);
  if (l < 1) {
    throw Error(ErrorCode::InvalidArgument, "level must be >= 1");
  }
  const double h = std::ldexp(1.0, -l);
  // On the line g_N vanishes outside [-1, 2) and each q_k has zero mean
  // over every unit period, so its primitive is the torus one clamped.
  const auto clampLine = [&](double y) {
    return domain == Domain::Line ? std::clamp(y, -1.0, 2.0) : y;
  };
  double upper = 0, lower = 0;
  for (int k = 2 * N + 1; k <= 3 * N; ++k) {
    upper += rademacherPrimitive(k, clampLine(x + h));
    lower += rademacherPrimitive(k, clampLine(x - h));
  }
  return std::ldexp(upper - lower, l - 1);
}

// ------------------------------------------------------------ E_l

int applyE(int N, int l, DyadicPoint x) {
  checkN(N, 1, 17);
  int s = 0;
  for (int k = 2 * N + 1; k <= std::min(l, 3 * N); ++k) {
    s += rademacher(k, x);
  }
  return s;
}

std::string toString(ChainOperator op) {
  switch (op) {
  case ChainOperator::A:
    return "A";
  case ChainOperator::DTorus:
    return "D";
  case ChainOperator::E:
    return "E";
  }
  return "?";
}

ChainOperator parseChainOperator(const std::string &name) {
  for (auto op : {ChainOperator::A, ChainOperator::DTorus, ChainOperator::E}) {
    if (toString(op) == name) {
      return op;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown operator " + name);
}

std::vector<double> chainValues(int N, ChainOperator op, DyadicPoint x) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(N) + 1);
  for (int l = 2 * N; l <= 3 * N; ++l) {
    switch (op) {
    case ChainOperator::A:
      out.push_back(applyA(N, l, x.value()));
      break;
    case ChainOperator::DTorus:
      out.push_back(applyD(N, l, x.value(), Domain::Torus));
      break;
    case ChainOperator::E:
      out.push_back(applyE(N, l, x));
      break;
    }
  }
  return out;
}

double chainVariation(int N, ChainOperator op, DyadicPoint x) {
  return variation(chainValues(N, op, x), VariationOrder(2));
}

// ------------------------------------------------------------ experiments

ProbeReport v2Experiment(const CounterexampleConfig &config, ChainOperator op) {
  checkN(config.N, 2, 14);
  if (config.sampleSize < 1000) {
    throw Error(ErrorCode::InvalidArgument, "needs at least 1000 samples");
  }
  const int N = config.N;
  std::vector<double> xs;
  const std::vector<double> v2 =
      sampleChain(N, op, config.sampleSize, config.seed, &xs);
  std::vector<double> ratio(v2.size());
  const double root = std::sqrt(static_cast<double>(N));
  std::transform(v2.begin(), v2.end(), ratio.begin(),
                 [&](double v) { return v / root; });
  std::sort(ratio.begin(), ratio.end());

  ProbeReport report("qian", "the v(2) norm of the dyadic martingale exceeds "
                             "c sqrt(N log log N) on a set of measure -> 1");
  report.setSeed(config.seed);
  report.setInput("N", static_cast<double>(N));
  report.setInput("samples", static_cast<double>(config.sampleSize));
  report.setInput("operator", toString(op));
  report.setStatistic("median", quantile(ratio, 0.5));
  report.setStatistic("q10", quantile(ratio, 0.1));
  report.setStatistic("q25", quantile(ratio, 0.25));
  report.setStatistic("q75", quantile(ratio, 0.75));
  report.setStatistic("q90", quantile(ratio, 0.9));
  report.setStatistic("min", ratio.front());
  report.setStatistic("max", ratio.back());

  Table samples{report.claim(), {"x", "v2"}, {}};
  for (std::size_t i = 0; i < v2.size(); ++i) {
    samples.rows.push_back({xs[i], v2[i]});
  }
  Table curve{report.claim(), {"c", "measure"}, {}};
  for (double c : measureGrid()) {
    curve.rows.push_back({c, exceedance(v2, N, c)});
  }
  report.addTable("v2_samples", std::move(samples));
  report.addTable("measure_curve", std::move(curve));
  const bool finite = std::all_of(v2.begin(), v2.end(),
                                  [](double v) { return std::isfinite(v); });
  report.setPass("finite", finite);
  if (op == ChainOperator::E) {
    report.setPass("v2_at_least_sqrtN", ratio.front() >= 1 - 1e-12);
  }
  return report;
}

ProbeReport qianGrowth(const std::vector<int> &Ns, std::size_t sampleSize,
                       std::uint64_t seed, ChainOperator op) {
  if (Ns.empty()) {
    throw Error(ErrorCode::InvalidArgument, "empty N list");
  }
  if (sampleSize < 1000) {
    throw Error(ErrorCode::InvalidArgument, "needs at least 1000 samples");
  }
  for (int N : Ns) {
    checkN(N, 2, 14);
  }
  ProbeReport report("qian", "the v(2) norm of the dyadic martingale exceeds "
                             "c sqrt(N log log N) on a set of measure -> 1");
  report.setSeed(seed);
  report.setInput("samples", static_cast<double>(sampleSize));
  report.setInput("operator", toString(op));
  std::string nList;
  for (int N : Ns) {
    nList += (nList.empty() ? "" : ",") + std::to_string(N);
  }
  report.setInput("N", nList);

  Table growth;
  growth.claim = report.claim();
  growth.columns = {"N", "median_v2_over_sqrtN", "q10", "q90", "min"};
  for (double c : measureGrid()) {
    growth.columns.push_back("measure_c" + formatDouble(c));
  }
  std::vector<double> medians, minima;
  std::vector<std::vector<double>> measures;
  for (int N : Ns) {
    std::vector<double> xs;
    const std::vector<double> v2 = sampleChain(N, op, sampleSize, seed, &xs);
    std::vector<double> ratio(v2.size());
    const double root = std::sqrt(static_cast<double>(N));
    std::transform(v2.begin(), v2.end(), ratio.begin(),
                   [&](double v) { return v / root; });
    std::sort(ratio.begin(), ratio.end());
    std::vector<double> row{static_cast<double>(N), quantile(ratio, 0.5),
                            quantile(ratio, 0.1), quantile(ratio, 0.9),
                            ratio.front()};
    std::vector<double> m;
    for (double c : measureGrid()) {
      m.push_back(exceedance(v2, N, c));
      row.push_back(m.back());
    }
    growth.rows.push_back(row);
    medians.push_back(row[1]);
    minima.push_back(row[4]);
    measures.push_back(m);
    report.setStatistic("median_N" + std::to_string(N), row[1]);
    Table samples{report.claim(), {"x", "v2"}, {}};
    for (std::size_t i = 0; i < v2.size(); ++i) {
      samples.rows.push_back({xs[i], v2[i]});
    }
    report.addTable("qian_samples_N" + std::to_string(N), std::move(samples));
  }
  report.addTable("qian_growth", std::move(growth));

  bool mediansUp = true, measuresUp = true;
  for (std::size_t i = 1; i < Ns.size(); ++i) {
    mediansUp = mediansUp && medians[i] >= medians[i - 1];
    for (std::size_t c = 0; c < measureGrid().size(); ++c) {
      if (measureGrid()[c] > 0.5 + 1e-12) {
        continue;
      }
      const double prev = measures[i - 1][c], cur = measures[i][c];
      if (std::isfinite(prev) && std::isfinite(cur)) {
        measuresUp = measuresUp && cur >= prev;
      }
    }
  }
  report.setPass("median_nondecreasing", mediansUp);
  report.setPass("measure_nondecreasing_c_le_half", measuresUp);
  if (op == ChainOperator::E) {
    report.setPass("v2_at_least_sqrtN",
                   *std::min_element(minima.begin(), minima.end()) >= 1 - 1e-12);
  }
  return report;
}

// ------------------------------------------------------------ Khinchine

KhinchineResult khinchineCheck(int N) {
  checkN(N, 1, 20);
  const std::uint64_t patterns = 1ULL << N;
  double s1 = 0, s2 = 0, s4 = 0, smax = 0;
  for (std::uint64_t b = 0; b < patterns; ++b) {
    const double t = N - 2.0 * std::popcount(b);
    s1 += std::abs(t);
    s2 += t * t;
    s4 += t * t * t * t;
    smax = std::max(smax, std::abs(t));
  }
  const double m = static_cast<double>(patterns);
  KhinchineResult out;
  out.l1 = s1 / m;
  out.l2 = std::sqrt(s2 / m);
  out.l4Fourth = s4 / m;
  out.l4 = std::pow(out.l4Fourth, 0.25);
  out.linf = smax;
  const double root = std::sqrt(static_cast<double>(N));
  // Sharp Khinchine constants: 2^{-1/2} for p = 1, 3^{1/4} for p = 4.
  out.withinConstants = out.l1 / root >= std::numbers::sqrt2 / 2 - 1e-12 &&
                        out.l1 / root <= 1 + 1e-12 &&
                        out.l4 / root >= 1 - 1e-12 &&
                        out.l4 / root <= std::pow(3.0, 0.25) + 1e-12;
  out.table = {"Khinchine: ||T_N||_p is comparable to sqrt(N)",
               {"p", "norm", "ratio_to_sqrtN"},
               {{1, out.l1, out.l1 / root},
                {2, out.l2, out.l2 / root},
                {4, out.l4, out.l4 / root}}};
  return out;
}

double gNNormPower(int N, double p) {
  checkN(N, 1, 20);
  if (!(p > 0)) {
    throw Error(ErrorCode::InvalidArgument, "p must be positive");
  }
  // The number of patterns with j minus signs is C(N, j).
  double sum = 0, binom = 1;
  for (int j = 0; j <= N; ++j) {
    sum += binom * std::pow(std::abs(N - 2.0 * j), p);
    binom = binom * (N - j) / (j + 1);
  }
  return 3 * sum / std::ldexp(1.0, N);
}

// ------------------------------------------------------------ Fourier

double fourierTerm(int l, double xi) {
  const double a = 2 * kPi * std::ldexp(xi, -l);
  if (std::abs(a) < 1e-2) {
    const double a2 = a * a;
    return std::abs(-a2 / 3 + 7.0 / 60.0 * a2 * a2);
  }
  return std::abs(std::exp(-0.5 * a * a) - std::sin(a) / a);
}

double fourierSum(int lmax, double xi) {
  double s = 0;
  for (int l = 1; l <= lmax; ++l) {
    s += fourierTerm(l, xi);
  }
  return s;
}

namespace {

/// Sum over l > lmax, closed with the geometric a^2/3 tail once a < 1e-3.
double fourierTail(int lmax, double xi) {
  double s = 0;
  int l = lmax + 1;
  for (; l < 2000; ++l) {
    const double a = 2 * kPi * std::ldexp(xi, -l);
    if (std::abs(a) < 1e-3) {
      return s + 4.0 / 9.0 * a * a;
    }
    s += fourierTerm(l, xi);
  }
  return s;
}

} // namespace

FourierComparison fourierComparison(int lmax, int pointsPerDecade,
                                    double xiMin, double xiMax) {
  if (lmax < 1 || lmax > 60) {
    throw Error(ErrorCode::InvalidArgument, "lmax must lie in [1, 60]");
  }
  if (!(xiMin > 0) || !(xiMax > xiMin) || pointsPerDecade < 1) {
    throw Error(ErrorCode::InvalidArgument, "bad frequency grid");
  }
  const int steps = static_cast<int>(
      std::ceil(std::log10(xiMax / xiMin) * pointsPerDecade));
  FourierComparison out;
  out.atZero = fourierSum(lmax, 0.0);
  out.curve.claim = "sum over l of |J^(2^-l xi) - chi^_l(xi)| is bounded in xi";
  out.curve.columns = {"xi", "sum"};
  double fullMax = 0;
  for (int i = 0; i <= steps; ++i) {
    const double xi = xiMin * std::pow(xiMax / xiMin, double(i) / steps);
    const double s = fourierSum(lmax, xi);
    const double tail = fourierTail(lmax, xi);
    out.curve.rows.push_back({xi, s});
    if (s > out.maxSum) {
      out.maxSum = s;
      out.argmax = xi;
    }
    if (i % 2 == 0) {
      out.halfGridMax = std::max(out.halfGridMax, s);
    }
    fullMax = std::max(fullMax, s + tail);
    out.pointwiseTail = std::max(out.pointwiseTail, tail);
    for (int l = 1; l <= lmax; ++l) {
      const double s1 = std::ldexp(xi, -l);
      if (s1 >= 1) {
        const double a = 2 * kPi * s1;
        out.decayViolations += std::abs(std::sin(a) / a) > 1 / s1 ? 1 : 0;
      }
    }
  }
  out.tailOfMax = fullMax - out.maxSum;
  return out;
}

ProbeReport fourierProbe(int lmax, int pointsPerDecade, double xiMin,
                         double xiMax) {
  FourierComparison c = fourierComparison(lmax, pointsPerDecade, xiMin, xiMax);
  ProbeReport report("fourier", c.curve.claim);
  report.setInput("lmax", lmax);
  report.setInput("points_per_decade", pointsPerDecade);
  report.setInput("xi_min", xiMin);
  report.setInput("xi_max", xiMax);
  report.setStatistic("max_sum", c.maxSum);
  report.setStatistic("argmax", c.argmax);
  report.setStatistic("half_grid_max", c.halfGridMax);
  report.setStatistic("at_zero", c.atZero);
  report.setStatistic("tail_of_max", c.tailOfMax);
  report.setStatistic("pointwise_tail", c.pointwiseTail);
  report.setStatistic("decay_violations", static_cast<double>(c.decayViolations));
  report.setPass("finite_and_grid_stable",
                 std::isfinite(c.maxSum) && c.maxSum <= 1.1 * c.halfGridMax);
  report.setPass("tail_below_1e-6", c.tailOfMax <= 1e-6);
  report.setPass("zero_at_origin", c.atZero == 0);
  report.setPass("single_term_decay", c.decayViolations == 0);
  report.addTable("fourier_sum", std::move(c.curve));
  return report;
}

// ------------------------------------------------------------ Delta_t

int deltaLevels(int N) { return 3 * N + 8; }

double applyDelta(const OUModel &model, int N, int l, double x) {
  if (model.dim() != 1) {
    throw Error(ErrorCode::DimensionMismatch, "operator part needs n = 1");
  }
  checkN(N, 1, 5);
  const double t = std::ldexp(1.0, -2 * l);
  const KernelSlice slice(model, t);
  const double m = slice.Mt()(0, 0);
  const double qt = slice.Qt()(0, 0);
  const double q = model.Q()(0, 0);
  const double root2pi = std::sqrt(2 * kPi);
  // Both kernels are Gaussians in u: K~ with centre D_t x and variance
  // 1/M_t, K^c with centre x and variance tQ.
  const double tilde = root2pi / std::sqrt(qt * m) *
                       gaussianAverageGN(N, slice.Dt()(0, 0) * x, 1 / std::sqrt(m));
  const double conv = root2pi * gaussianAverageGN(N, x, std::sqrt(t * q));
  return tilde - conv;
}

ProbeReport deltaOperatorBound(const OUModel &model, const DeltaConfig &config) {
  const Index n = model.dim();
  if (n > 2) {
    throw Error(ErrorCode::InvalidArgument, "difference operator needs n <= 2");
  }
  if (config.pointSamples < 2) {
    throw Error(ErrorCode::InvalidArgument, "needs at least 2 samples");
  }
  const double nd = static_cast<double>(n);
  const double lead = 0.5 * (1 - nd);
  ProbeReport report("delta",
                     "|K~_t - K^c_t| <= C t^{(1-n)/2} exp(-c |Q^{-1/2}(x-u)|^2 "
                     "/ t) and the v(2) of Delta_{2^-2l} f is bounded on L^2");
  report.setSeed(config.seed);
  report.setInput("point_samples", static_cast<double>(config.pointSamples));

  // Pointwise: per sample keep log|diff|, log t and |Q^{-1/2}(x-u)|^2 / t.
  struct Sample {
    double logDiff, logT, spread;
  };
  std::vector<Sample> samples(config.pointSamples);
  const Matrix qInv = model.QInv();
  parallelFor(config.pointSamples, [&](std::size_t i) {
    PointStream rng(config.seed, i);
    const Vector x = (rng.uniformBox(n, 0.5).array() + 0.5).matrix();
    const Vector u = (rng.uniformBox(n, 0.5).array() + 0.5).matrix();
    const double t = std::exp(rng.uniform(std::log(1e-6), 0.0));
    const double d = std::abs(mehlerKTilde(model, {x, u, t}) -
                              convKernel(model, x - u, t));
    const Vector y = x - u;
    samples[i] = {std::log(d), std::log(t), y.dot(qInv * y) / t};
  });
  const auto maxRatio = [&](double c, std::size_t count) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < count; ++i) {
      const auto &s = samples[i];
      best = std::max(best, s.logDiff - lead * s.logT + c * s.spread);
    }
    return std::exp(best);
  };
  const std::size_t half = samples.size() / 2;
  const auto stable = [&](double c) {
    const double full = maxRatio(c, samples.size());
    return std::isfinite(full) && full <= 1.1 * maxRatio(c, half);
  };
  double rate = 0;
  if (config.rate) {
    rate = *config.rate;
  } else {
    // The convolution kernel decays at rate 1/2; the largest stable rate
    // below it is taken.
    double lo = 5e-4, hi = 0.5 * (1 - 1e-9);
    if (stable(hi)) {
      lo = hi;
    } else {
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (stable(mid) ? lo : hi) = mid;
      }
    }
    rate = lo;
  }
  const double ratio = maxRatio(rate, samples.size());
  const double ratioHalf = maxRatio(rate, half);
  report.setInput("rate", rate);
  report.setStatistic("pointwise_ratio", ratio);
  report.setStatistic("pointwise_ratio_half", ratioHalf);
  report.setPass("pointwise_finite_and_stable",
                 std::isfinite(ratio) && ratio <= 1.1 * ratioHalf);

  // Diagonal decay: expansion of Q_t and D_t gives |K~ - K^c| ~ t^{1-n/2}.
  const Vector xd = Vector::Constant(n, 0.5);
  const auto diagonal = [&](double t) {
    return std::abs(mehlerKTilde(model, {xd, xd, t}) -
                    convKernel(model, Vector::Zero(n), t));
  };
  const double slope =
      std::log(diagonal(1e-6) / diagonal(1e-4)) / std::log(1e-2);
  report.setStatistic("diagonal_slope", slope);
  report.setStatistic("diagonal_slope_expected", 1 - 0.5 * nd);
  report.setPass("diagonal_slope", std::abs(slope - (1 - 0.5 * nd)) <= 0.1 &&
                                       slope >= lead - 0.1);
  Vector uFar = xd;
  uFar(0) += 1;
  const double farLoose = std::abs(mehlerKTilde(model, {xd, uFar, 0.05}) -
                                   convKernel(model, xd - uFar, 0.05));
  const double farTight = std::abs(mehlerKTilde(model, {xd, uFar, 0.005}) -
                                   convKernel(model, xd - uFar, 0.005));
  report.setStatistic("far_difference_t0.05", farLoose);
  report.setStatistic("far_difference_t0.005", farTight);
  report.setPass("far_difference", farTight <= 1e-10);

  if (n != 1) {
    report.setInput("operator_part", "skipped for n > 1");
    return report;
  }
  // Operator: || v(2)_l Delta g_N ||_{L^2(0,1)} / ||g_N||_{L^2(-1,2)}.
  Table table{report.claim(), {"N", "ratio", "ratio_half"}, {}};
  std::vector<double> ratios;
  bool sampleStable = true;
  for (int N : config.Ns) {
    checkN(N, 2, 5);
    std::vector<double> v2(config.operatorSamples);
    parallelFor(config.operatorSamples, [&](std::size_t i) {
      PointStream rng(config.seed + 1, i);
      const double x = DyadicPoint::sample(rng).value();
      std::vector<double> path;
      for (int l = 1; l <= deltaLevels(N); ++l) {
        path.push_back(applyDelta(model, N, l, x));
      }
      v2[i] = variation(path, VariationOrder(2));
    });
    const auto l2 = [&](std::size_t count) {
      double s = 0;
      for (std::size_t i = 0; i < count; ++i) {
        s += v2[i] * v2[i];
      }
      return std::sqrt(s / static_cast<double>(count)) /
             std::sqrt(gNNormPower(N, 2));
    };
    const double r = l2(v2.size()), rh = l2(v2.size() / 2);
    table.rows.push_back({static_cast<double>(N), r, rh});
    ratios.push_back(r);
    sampleStable = sampleStable && std::abs(r - rh) <= 0.1 * r;
    report.setStatistic("operator_ratio_N" + std::to_string(N), r);
  }
  report.setInput("operator_samples", static_cast<double>(config.operatorSamples));
  report.addTable("delta_operator", std::move(table));
  const double lo = *std::min_element(ratios.begin(), ratios.end());
  const double hi = *std::max_element(ratios.begin(), ratios.end());
  report.setPass("operator_sample_stable", sampleStable);
  report.setPass("operator_bounded_in_N", std::isfinite(hi) && hi <= 1.1 * std::max(lo, ratios.front()));
  return report;
}

// ------------------------------------------------------------ tensor

TensorTerm tensorAssembly(int N, const Vector &xPrime, int l) {
  if (xPrime.size() < 1) {
    throw Error(ErrorCode::DimensionMismatch, "empty point");
  }
  const double sigma = std::ldexp(1.0, -l);
  TensorTerm out;
  out.mainTerm = applyA(N, l, xPrime(0));
  // 1 - prod (1 - e_i) with e_i the Gaussian mass outside [-1, 2].
  double logProd = 0;
  for (Index i = 1; i < xPrime.size(); ++i) {
    const double y = xPrime(i);
    const double e = normalCdf((-1 - y) / sigma) + normalCdf((y - 2) / sigma);
    logProd += std::log1p(-e);
  }
  out.residualFactor = -std::expm1(logProd);
  out.residual = out.mainTerm * out.residualFactor;
  return out;
}

TensorResidual tensorResidualVariation(int N, const Vector &xPrime) {
  std::vector<double> residuals;
  TensorResidual out;
  for (int l = 2 * N + 1; l <= 3 * N; ++l) {
    const TensorTerm term = tensorAssembly(N, xPrime, l);
    residuals.push_back(term.residual);
    out.maxFactor = std::max(out.maxFactor,
                             term.residualFactor / std::ldexp(1.0, -2 * l));
  }
  out.variation = variation(residuals, VariationOrder(2));
  double sq = 0;
  for (double r : residuals) {
    sq += r * r;
  }
  out.discreteBound = std::numbers::sqrt2 * std::sqrt(sq);
  out.target = std::sqrt(static_cast<double>(N)) * std::ldexp(1.0, -N);
  out.holds = out.variation <= out.discreteBound + 1e-300 &&
              out.discreteBound <= out.target && out.maxFactor <= 1;
  return out;
}

// ------------------------------------------------------------ failure

ProbeReport weakTypeFailure(const FailureConfig &config) {
  if (config.Ns.empty() || config.ps.empty()) {
    throw Error(ErrorCode::InvalidArgument, "empty N or p grid");
  }
  for (int N : config.Ns) {
    checkN(N, 4, 12);
  }
  for (double p : config.ps) {
    if (!(p >= 1 && p <= 4)) {
      throw Error(ErrorCode::InvalidArgument, "p must lie in [1, 4]");
    }
  }
  if (config.sampleSize < 1000) {
    throw Error(ErrorCode::InvalidArgument, "needs at least 1000 samples");
  }
  ProbeReport report("failure",
                     "the v(2) variation operator is not of weak or strong "
                     "type (p,p): W_p(N) grows with N");
  report.setSeed(config.seed);
  report.setInput("samples", static_cast<double>(config.sampleSize));
  report.setInput("min_exceedances", static_cast<double>(config.minExceedances));
  std::string nList, pList;
  for (int N : config.Ns) {
    nList += (nList.empty() ? "" : ",") + std::to_string(N);
  }
  for (double p : config.ps) {
    pList += (pList.empty() ? "" : ",") + formatDouble(p);
  }
  report.setInput("N", nList);
  report.setInput("p", pList);

  Table table;
  table.claim = report.claim();
  table.columns = {"N", "median_phi_over_sqrtN", "tensor_residual_v2"};
  for (double p : config.ps) {
    table.columns.push_back("W_p" + formatDouble(p));
    table.columns.push_back("W_p" + formatDouble(p) + "_half");
  }
  const auto supWeighted = [&](std::vector<double> v, double p) {
    std::sort(v.begin(), v.end(), std::greater<>());
    const double m = static_cast<double>(v.size());
    double best = 0;
    for (std::size_t k = std::max<std::size_t>(config.minExceedances, 1);
         k <= v.size(); ++k) {
      best = std::max(best, std::pow(v[k - 1], p) * static_cast<double>(k) / m);
    }
    return best;
  };
  std::map<double, std::vector<double>> W;
  bool stable = true, residualOk = true;
  Vector probe(2);
  probe << 0.5, 0.5;
  for (int N : config.Ns) {
    const std::vector<double> phi =
        sampleChain(N, ChainOperator::A, config.sampleSize, config.seed);
    std::vector<double> sorted = phi;
    std::sort(sorted.begin(), sorted.end());
    const double median = quantile(sorted, 0.5) / std::sqrt(double(N));
    const TensorResidual res = tensorResidualVariation(N, probe);
    residualOk = residualOk && res.holds;
    std::vector<double> row{static_cast<double>(N), median, res.variation};
    const std::vector<double> half(phi.begin(),
                                   phi.begin() + static_cast<std::ptrdiff_t>(phi.size() / 2));
    for (double p : config.ps) {
      const double norm = gNNormPower(N, p);
      const double w = supWeighted(phi, p) / norm;
      const double wh = supWeighted(half, p) / norm;
      W[p].push_back(w);
      stable = stable && std::abs(w - wh) <= 0.1 * w;
      row.push_back(w);
      row.push_back(wh);
      report.setStatistic("W_p" + formatDouble(p) + "_N" + std::to_string(N), w);
    }
    report.setStatistic("median_phi_over_sqrtN_N" + std::to_string(N), median);
    table.rows.push_back(row);
  }
  report.addTable("failure_growth", std::move(table));
  for (double p : config.ps) {
    const auto &w = W[p];
    bool increasing = true;
    for (std::size_t i = 1; i < w.size(); ++i) {
      increasing = increasing && w[i] > w[i - 1];
    }
    report.setPass("increasing_p" + formatDouble(p), increasing);
  }
  report.setPass("tensor_residual", residualOk);
  report.setStatistic("half_sample_stable", stable ? 1 : 0);
  return report;
}

} // namespace oulab::torus
