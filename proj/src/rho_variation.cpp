#include "oulab/rho_variation.hpp"

#include "oulab/quadrature.hpp"
#include "oulab/types.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <fstream>
#include <sstream>

namespace oulab {

SampledPath::SampledPath(std::vector<double> times, std::vector<double> values)
    : times_(std::move(times)), values_(std::move(values)) {
  if (values_.empty()) {
    throw Error(ErrorCode::EmptyPath, "path has no samples");
  }
  if (times_.size() != values_.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "times and values differ in length");
  }
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (!std::isfinite(times_[i]) || !std::isfinite(values_[i])) {
      throw Error(ErrorCode::NonFinite, "path contains non-finite samples");
    }
    if (i > 0 && !(times_[i] > times_[i - 1])) {
      throw Error(ErrorCode::InvalidArgument,
                  "path times must be strictly increasing");
    }
  }
}

SampledPath SampledPath::slice(std::size_t first, std::size_t last) const {
  if (first > last || last >= size()) {
    throw Error(ErrorCode::BadSplit, "slice bounds out of range");
  }
  const auto b = static_cast<std::ptrdiff_t>(first);
  const auto e = static_cast<std::ptrdiff_t>(last) + 1;
  return SampledPath({times_.begin() + b, times_.begin() + e},
                     {values_.begin() + b, values_.begin() + e});
}

VariationOrder::VariationOrder(double rho) : rho_(rho) {
  if (!(rho >= 1) || !std::isfinite(rho)) {
    throw Error(ErrorCode::BadOrder, "variation order must be >= 1");
  }
}

double guardedPower(double d, double rho) {
  d = std::abs(d);
  if (d < 1e-300) {
    return 0;
  }
  if (rho == 1) {
    return d;
  }
  if (rho == 2) {
    return d * d;
  }
  return std::pow(d, rho);
}

double variationDp(std::span<const double> values, VariationOrder order) {
  if (values.empty()) {
    throw Error(ErrorCode::EmptyPath, "path has no samples");
  }
  const double rho = order.value();
  std::vector<double> best(values.size(), 0.0);
  double top = 0;
  for (std::size_t j = 1; j < values.size(); ++j) {
    double b = 0;
    for (std::size_t i = 0; i < j; ++i) {
      b = std::max(b, best[i] + guardedPower(values[j] - values[i], rho));
    }
    best[j] = b;
    top = std::max(top, b);
  }
  return std::pow(top, 1 / rho);
}

std::vector<std::size_t> turningPoints(std::span<const double> values) {
  std::vector<std::size_t> keep;
  const std::size_t n = values.size();
  if (n == 0) {
    return keep;
  }
  keep.push_back(0);
  int lastDir = 0;
  for (std::size_t i = 1; i < n; ++i) {
    const double d = values[i] - values[keep.back()];
    if (d == 0) {
      continue;
    }
    const int dir = d > 0 ? 1 : -1;
    if (dir == lastDir) {
      keep.back() = i; // extend the monotone run
    } else {
      keep.push_back(i);
      lastDir = dir;
    }
  }
  return keep;
}

double variation(std::span<const double> values, VariationOrder rho) {
  if (values.empty()) {
    throw Error(ErrorCode::EmptyPath, "path has no samples");
  }
  if (rho.value() == 1) {
    double total = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
      total += std::abs(values[i] - values[i - 1]);
    }
    return total;
  }
  const std::vector<std::size_t> idx = turningPoints(values);
  std::vector<double> reduced(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    reduced[i] = values[idx[i]];
  }
  return variationDp(reduced, rho);
}

double variation(const SampledPath &path, VariationOrder rho) {
  return variation(std::span<const double>(path.values()), rho);
}

double variationExhaustive(std::span<const double> values,
                           VariationOrder order) {
  const std::size_t n = values.size();
  if (n == 0) {
    throw Error(ErrorCode::EmptyPath, "path has no samples");
  }
  if (n > 20) {
    throw Error(ErrorCode::TooLong, "exhaustive variation limited to 20 points");
  }
  const double rho = order.value();
  double best = 0;
  const unsigned long subsets = 1UL << n;
  for (unsigned long mask = 1; mask < subsets; ++mask) {
    double sum = 0;
    long prev = -1;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1UL << i)) {
        if (prev >= 0) {
          sum += guardedPower(values[i] - values[static_cast<std::size_t>(prev)],
                              rho);
        }
        prev = static_cast<long>(i);
      }
    }
    best = std::max(best, sum);
  }
  return std::pow(best, 1 / rho);
}

double discreteVariation(std::span<const double> values, VariationOrder rho) {
  const double v = variation(values, rho);
#ifndef NDEBUG
  if (rho.value() == 2) {
    double sq = 0;
    for (double x : values) {
      sq += x * x;
    }
    assert(v <= std::sqrt(2.0 * sq) * (1 + 1e-12) + 1e-300);
  }
#endif
  return v;
}

VariationPropertiesReport variationProperties(const SampledPath &path,
                                              double rho1, double rho2,
                                              std::size_t splitIndex) {
  if (!(rho1 < rho2)) {
    throw Error(ErrorCode::BadOrder, "need rho1 < rho2");
  }
  if (splitIndex == 0 || splitIndex + 1 >= path.size()) {
    throw Error(ErrorCode::BadSplit, "split must be an interior sample");
  }
  VariationPropertiesReport r;
  const VariationOrder o1(rho1), o2(rho2);
  r.lowOrderValue = variation(path, o1);
  r.highOrderValue = variation(path, o2);
  r.left = variation(path.slice(0, splitIndex), o1);
  r.right = variation(path.slice(splitIndex, path.size() - 1), o1);
  r.monotoneInOrder = r.highOrderValue <= r.lowOrderValue * (1 + 1e-12);
  r.subadditive = r.lowOrderValue <= (r.left + r.right) * (1 + 1e-12);
  return r;
}

DerivativeBound derivativeBoundCheck(const std::function<double(double)> &phi,
                                     const std::function<double(double)> &dphi,
                                     double a, double b, double rho,
                                     int gridSize) {
  if (gridSize < 2 || !(b > a)) {
    throw Error(ErrorCode::InvalidArgument, "need gridSize >= 2 and a < b");
  }
  std::vector<double> values(static_cast<std::size_t>(gridSize));
  for (int i = 0; i < gridSize; ++i) {
    const double t = a + (b - a) * i / (gridSize - 1);
    values[static_cast<std::size_t>(i)] = phi(t);
  }
  DerivativeBound out;
  out.variation = variation(values, VariationOrder(rho));
  out.derivativeIntegral =
      integrateAdaptive([&](double t) { return std::abs(dphi(t)); }, a, b,
                        1e-12)
          .value;
  out.holds = out.variation <= out.derivativeIntegral + 1e-9;
  return out;
}

SampledPath readPathCsv(const std::string &file) {
  std::ifstream in(file);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open path file " + file);
  }
  std::vector<double> times, values;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double t = 0, v = 0;
    if (!(ls >> t >> v)) {
      if (first) {
        first = false;
        continue;
      }
      throw Error(ErrorCode::Parse, "bad CSV line: " + line);
    }
    first = false;
    times.push_back(t);
    values.push_back(v);
  }
  return SampledPath(std::move(times), std::move(values));
}

} // namespace oulab
