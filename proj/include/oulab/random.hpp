#ifndef OULAB_RANDOM_HPP
#define OULAB_RANDOM_HPP

#include "oulab/types.hpp"

#include <cstdint>
#include <random>

namespace oulab {

/// Independent stream for sample point `index` of a run seeded by `seed`.
/// Streams do not depend on evaluation order, so sweeps can be split
/// across threads without changing results.
class PointStream {
public:
  PointStream(std::uint64_t seed, std::uint64_t index);

  std::uint64_t bits() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double normal();
  Vector normalVector(Index n);
  /// Uniform on the cube [-r, r]^n.
  Vector uniformBox(Index n, double r);

private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// Monte Carlo sample description shared by the probes.
struct SampleSpec {
  std::size_t size = 1000;
  std::uint64_t seed = 1;
  /// Half-width of the coordinate box points are drawn from.
  double radius = 5;
};

} // namespace oulab

#endif // OULAB_RANDOM_HPP
