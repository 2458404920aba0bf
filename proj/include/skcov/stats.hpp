#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string_view>
#include <utility>

#include "skcov/rng.hpp"

namespace skcov {

// Kahan compensated accumulator.
struct KahanSum {
  double s = 0.0;
  double c = 0.0;

  void add(double x) {
    const double y = x - c;
    const double t = s + y;
    c = (t - s) - y;
    s = t;
  }

  void scale(double r) {
    s *= r;
    c *= r;
  }

  double value() const { return s; }
};

// One-pass mean/variance (Welford) with associative merging.
struct EnsembleStat {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;  // sum of squared deviations from the running mean

  void add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }

  // Chan et al. parallel combine.
  static EnsembleStat merged(const EnsembleStat& a, const EnsembleStat& b) {
    if (a.count == 0) return b;
    if (b.count == 0) return a;
    EnsembleStat r;
    r.count = a.count + b.count;
    const double d = b.mean - a.mean;
    const double na = static_cast<double>(a.count);
    const double nb = static_cast<double>(b.count);
    const double nr = na + nb;
    r.mean = a.mean + d * nb / nr;
    r.m2 = a.m2 + b.m2 + d * d * na * nb / nr;
    return r;
  }

  double variance() const {
    if (count < 2) return 0.0;
    return m2 / static_cast<double>(count - 1);
  }

  double se() const {
    if (count == 0) throw std::invalid_argument("EnsembleStat::se: empty ensemble");
    return std::sqrt(variance() / static_cast<double>(count));
  }

  double ci95_half() const { return 1.96 * se(); }
};

inline EnsembleStat accumulate(std::span<const double> values) {
  EnsembleStat s;
  for (double v : values) s.add(v);
  return s;
}

struct SeedLabel {
  std::string_view name;
  std::uint64_t index = 0;
};

// Derive an independent, reproducible substream seed from a master seed and
// an ordered list of labels. Each label's name is hashed with FNV-1a and
// folded into the state through the splitmix64 finalizer, then the index is
// folded the same way, so both the labels and their order matter.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<SeedLabel> labels) {
  std::uint64_t h = mix64(master ^ 0x736B636F76ULL);  // "skcov" tag
  for (const SeedLabel& l : labels) {
    h = mix64(h ^ fnv1a64(l.name));
    h = mix64(h ^ l.index);
  }
  return h;
}

}  // namespace skcov
