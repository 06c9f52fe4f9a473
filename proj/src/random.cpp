#include "oulab/random.hpp"

namespace oulab {

PointStream::PointStream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32), 0x9e3779b9u};
  engine_.seed(seq);
}

double PointStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double PointStream::normal() { return normal_(engine_); }

Vector PointStream::normalVector(Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) {
    v(i) = normal();
  }
  return v;
}

Vector PointStream::uniformBox(Index n, double r) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) {
    v(i) = uniform(-r, r);
  }
  return v;
}

} // namespace oulab
