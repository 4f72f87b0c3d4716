#pragma once

// Span kernels shared by the public metric functions and the fused series kernel.

#include <algorithm>
#include <cmath>
#include <span>

#include "ueval/core.hpp"

namespace ueval::detail {

inline double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(std::max(x, kProbFloor));
  return std::max(h, 0.0);
}

inline double max_of(std::span<const double> p) { return *std::max_element(p.begin(), p.end()); }

inline double top_gap(std::span<const double> p) {
  double first = -1.0;
  double second = -1.0;
  for (double x : p) {
    if (x > first) {
      second = first;
      first = x;
    } else if (x > second) {
      second = x;
    }
  }
  return first - second;
}

inline double log_sum_exp(std::span<const double> z) {
  const double m = max_of(z);
  double s = 0.0;
  for (double x : z) s += std::exp(x - m);
  return m + std::log(s);
}

inline double dempster_shafer(std::span<const double> z) {
  // K / (K + e^L) = 1 / (1 + e^(L - ln K))
  const double excess = log_sum_exp(z) - std::log(static_cast<double>(z.size()));
  return 1.0 / (1.0 + std::exp(excess));
}

/// Softmax of `z` written to `out` (same length).
inline void softmax_into(std::span<const double> z, std::span<double> out) {
  const double m = max_of(z);
  double s = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    out[k] = std::exp(z[k] - m);
    s += out[k];
  }
  for (double& x : out) x /= s;
}

}  // namespace ueval::detail
