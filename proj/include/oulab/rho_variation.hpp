#ifndef OULAB_RHO_VARIATION_HPP
#define OULAB_RHO_VARIATION_HPP

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace oulab {

/// A path sampled on a strictly increasing time grid.
class SampledPath {
public:
  SampledPath(std::vector<double> times, std::vector<double> values);

  const std::vector<double> &times() const { return times_; }
  const std::vector<double> &values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  /// Sub-path on samples [first, last] inclusive.
  SampledPath slice(std::size_t first, std::size_t last) const;

private:
  std::vector<double> times_;
  std::vector<double> values_;
};

/// Variation order rho >= 1.
class VariationOrder {
public:
  explicit VariationOrder(double rho);
  double value() const { return rho_; }

private:
  double rho_;
};

/// |d|^rho, flushed to zero for |d| < 1e-300.
double guardedPower(double d, double rho);

/// Supremum over increasing subsequences of the samples of
/// (sum |phi_j - phi_{j-1}|^rho)^{1/rho}. The path is first reduced to
/// its turning points, then an O(N^2) dynamic program runs on those.
double variation(std::span<const double> values, VariationOrder rho);
double variation(const SampledPath &path, VariationOrder rho);

/// The plain O(N^2) dynamic program without the turning-point reduction.
double variationDp(std::span<const double> values, VariationOrder rho);

/// Brute force over all 2^N subsequences; N <= 20.
double variationExhaustive(std::span<const double> values, VariationOrder rho);

/// Values indexed by consecutive integers. For rho = 2 the result is
/// checked against sqrt(2) * (sum phi^2)^{1/2} in debug builds.
double discreteVariation(std::span<const double> values, VariationOrder rho);

/// Indices of local extrema (plus both endpoints) after merging flat runs.
std::vector<std::size_t> turningPoints(std::span<const double> values);

struct VariationPropertiesReport {
  double lowOrderValue = 0;   // v(rho1)
  double highOrderValue = 0;  // v(rho2)
  double left = 0;            // v(rho1) on samples [0, split]
  double right = 0;           // v(rho1) on samples [split, N-1]
  bool monotoneInOrder = false;
  bool subadditive = false;
};

VariationPropertiesReport variationProperties(const SampledPath &path,
                                              double rho1, double rho2,
                                              std::size_t splitIndex);

struct DerivativeBound {
  double variation = 0;
  double derivativeIntegral = 0;
  bool holds = false;
};

/// Compares the sampled v(rho) of phi on a uniform grid over [a, b] with an
/// adaptive quadrature of |phi'|.
DerivativeBound derivativeBoundCheck(const std::function<double(double)> &phi,
                                     const std::function<double(double)> &dphi,
                                     double a, double b, double rho,
                                     int gridSize);

/// Reads a two-column (t,value) CSV. A header line is skipped if it does
/// not parse as numbers.
SampledPath readPathCsv(const std::string &path);

} // namespace oulab

#endif // OULAB_RHO_VARIATION_HPP
