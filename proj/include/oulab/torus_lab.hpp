#ifndef OULAB_TORUS_LAB_HPP
#define OULAB_TORUS_LAB_HPP

#include "oulab/ou_model.hpp"
#include "oulab/random.hpp"
#include "oulab/report.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

// Rademacher sums on [0,1) and the operator chain A_l -> D_l -> E_l acting
// on them. With I_N = {2N < l <= 3N}:
//   T_N = sum_{k in I_N} r_k on the torus,
//   g_N = sum_{k in I_N} q_k on the line, q_k the 3-fold periodisation of
//         r_k to [-1, 2).
namespace oulab::torus {

/// x = numerator * 2^-53. Sampled points have an odd numerator, so they
/// never sit on a slot boundary of any r_k with k <= 52.
struct DyadicPoint {
  static constexpr int kBits = 53;
  std::uint64_t numerator = 1;

  double value() const;
  /// k-th binary digit after the point, 1 <= k <= kBits.
  int digit(int k) const;
  static DyadicPoint sample(PointStream &rng);
};

/// +1 on even dyadic slots of length 2^-k, -1 on odd ones. x in [0,1).
int rademacher(int k, double x);
int rademacher(int k, DyadicPoint x);
/// r_k(u+1) + r_k(u) + r_k(u-1): r_k(frac u) on [-1, 2), else 0.
int qk(int k, double u);

struct CounterexampleConfig {
  int N = 4;
  std::uint64_t seed = 1;
  std::size_t sampleSize = 1000;

  int windowBegin() const { return 2 * N + 1; }
  int windowEnd() const { return 3 * N; }
};

double tN(int N, double x);
double gN(int N, double u);

/// int N(u; mean, sigma^2) h(u) du for h piecewise constant on the slots
/// [j w, (j+1) w) with value slotValue(j), restricted to [lo, hi) and to
/// the 12-sigma window around the mean.
double gaussianStepAverage(const std::function<double(long long)> &slotValue,
                           double width, double lo, double hi, double mean,
                           double sigma);

/// int N(u; mean, sigma^2) q_k(u) du.
double gaussianRademacher(int k, double mean, double sigma);
/// int N(u; mean, sigma^2) g_N(u) du. Inside the window a Rademacher term
/// whose slot is below sigma/4 is dropped: its Fourier coefficients are
/// damped by exp(-8 pi^2) or more, under 1e-30 in total.
double gaussianAverageGN(int N, double mean, double sigma);

/// J_{2^-2l} * g_N (x): the Gaussian of variance 2^-2l against g_N.
double applyA(int N, int l, double x);

/// Primitive of r_k(frac .) from 0: a tent of height 2^-k on each period.
double rademacherPrimitive(int k, double y);
/// 2^{l-1} int_{x-2^-l}^{x+2^-l} r_k(frac u) du.
double meanValueRademacher(int k, int l, double x);

enum class Domain { Line, Torus };
/// 2^{l-1} int_{x-2^-l}^{x+2^-l} of g_N (line) or T_N (torus). Every
/// operation is exact in binary floating point for dyadic x.
double applyD(int N, int l, double x, Domain domain);

/// E_l T_N(x) = sum_{k in I_N, k <= l} r_k(x).
int applyE(int N, int l, DyadicPoint x);

enum class ChainOperator { A, DTorus, E };
std::string toString(ChainOperator op);
ChainOperator parseChainOperator(const std::string &name);

/// op_l(x) for l = 2N, 2N+1, ..., 3N. The first entry anchors the chain
/// where E_{2N} T_N = 0, so the N increments of the martingale all count.
std::vector<double> chainValues(int N, ChainOperator op, DyadicPoint x);
double chainVariation(int N, ChainOperator op, DyadicPoint x);

/// Distribution of v(2)/sqrt(N) of the chain over uniform x, and the
/// measure of {v(2) > c sqrt(N log log N)} for c = 0.1, ..., 1.0.
ProbeReport v2Experiment(const CounterexampleConfig &config, ChainOperator op);

/// v2Experiment summarised over several N, with trend pass flags.
ProbeReport qianGrowth(const std::vector<int> &Ns, std::size_t sampleSize,
                       std::uint64_t seed,
                       ChainOperator op = ChainOperator::E);

/// Moments of T_N by exact enumeration of the 2^N digit patterns.
struct KhinchineResult {
  double l2 = 0;        // ||T_N||_2
  double l1 = 0;        // ||T_N||_1
  double l4 = 0;        // ||T_N||_4
  double l4Fourth = 0;  // ||T_N||_4^4
  double linf = 0;      // ||g_N||_inf
  bool withinConstants = false;
  Table table;
};
KhinchineResult khinchineCheck(int N);

/// int |g_N|^p over the line, which is 3 E|T_N|^p.
double gNNormPower(int N, double p);

/// |exp(-2 pi^2 s^2) - sin(2 pi s)/(2 pi s)| with s = 2^-l xi.
double fourierTerm(int l, double xi);
/// Sum of fourierTerm over 1 <= l <= lmax.
double fourierSum(int lmax, double xi);

struct FourierComparison {
  double maxSum = 0;      // max over the grid of the partial sum
  double argmax = 0;
  double halfGridMax = 0; // same on every other grid point
  double atZero = 0;
  double tailOfMax = 0;   // change of maxSum when all l are summed
  double pointwiseTail = 0;  // largest sum over l > lmax on the grid
  std::size_t decayViolations = 0;
  Table curve;
};
FourierComparison fourierComparison(int lmax = 40, int pointsPerDecade = 50,
                                    double xiMin = 1e-3, double xiMax = 1e9);
/// fourierComparison as a report. The tail criterion is on the max
/// statistic: the pointwise tail at the top of the grid decays only
/// like 2^-lmax xi.
ProbeReport fourierProbe(int lmax = 40, int pointsPerDecade = 50,
                         double xiMin = 1e-3, double xiMax = 1e9);

struct DeltaConfig {
  std::vector<int> Ns{2, 3, 4};
  std::size_t pointSamples = 4000;
  std::size_t operatorSamples = 300;
  std::uint64_t seed = 1;
  /// Exponent constant in the pointwise bound; calibrated when unset.
  std::optional<double> rate;
};

/// Delta_{2^-2l} g_N (x): kernel K~_t - K^c_t against g_N, n = 1.
double applyDelta(const OUModel &model, int N, int l, double x);
/// Length of the l-range used for the v(2) over l >= 1.
int deltaLevels(int N);

ProbeReport deltaOperatorBound(const OUModel &model, const DeltaConfig &config);

struct TensorTerm {
  double mainTerm = 0;        // A_l g_N (x'_1)
  double residualFactor = 0;  // 1 - prod_{i>=2} J_t * chi_[-1,2] (x'_i)
  double residual = 0;        // mainTerm * residualFactor
};
TensorTerm tensorAssembly(int N, const Vector &xPrime, int l);

struct TensorResidual {
  double variation = 0;     // v(2) over the window of the residuals
  double discreteBound = 0; // sqrt(2) (sum residual^2)^{1/2}
  double maxFactor = 0;     // max residualFactor / t over the window
  double target = 0;        // N^{1/2} 2^-N
  bool holds = false;
};
TensorResidual tensorResidualVariation(int N, const Vector &xPrime);

struct FailureConfig {
  std::vector<double> ps{2};
  std::vector<int> Ns{4, 6, 8, 10, 12};
  std::size_t sampleSize = 4000;
  std::uint64_t seed = 1;
  std::size_t minExceedances = 10;
};

/// W_p(N) = sup_alpha alpha^p |{Phi_N > alpha}| / ||g_N||_p^p with
/// Phi_N(x) the v(2) of the A-chain; passes when W_p grows with N for
/// every p and the tensor residual stays below N^{1/2} 2^-N.
ProbeReport weakTypeFailure(const FailureConfig &config);

} // namespace oulab::torus

#endif // OULAB_TORUS_LAB_HPP
