#pragma once

// Slow, obviously-correct reference computations used to check the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <utility>
#include <vector>

namespace oracle {

inline double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

/// Pair counting over all (id, ood) pairs; OOD positive, ties 1/2.
inline double auroc(const std::vector<double>& id, const std::vector<double>& ood) {
  double wins = 0.0;
  for (double o : ood)
    for (double i : id) wins += o > i ? 1.0 : (o == i ? 0.5 : 0.0);
  return wins / (static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

/// Average precision by sweeping every distinct threshold, counting from scratch each time.
inline double aupr(const std::vector<double>& id, const std::vector<double>& ood) {
  std::vector<double> thresholds(id);
  thresholds.insert(thresholds.end(), ood.begin(), ood.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double ap = 0.0;
  double prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0.0;
    double fp = 0.0;
    for (double o : ood) tp += o >= t ? 1.0 : 0.0;
    for (double i : id) fp += i >= t ? 1.0 : 0.0;
    const double recall = tp / static_cast<double>(ood.size());
    ap += (recall - prev_recall) * tp / (tp + fp);
    prev_recall = recall;
  }
  return ap;
}

/// Tau-b by enumerating all pairs.
inline double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
  long long concordant = 0;
  long long discordant = 0;
  long long tie_x_only = 0;
  long long tie_y_only = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0.0 && dy == 0.0) continue;
      if (dx == 0.0) {
        ++tie_x_only;
      } else if (dy == 0.0) {
        ++tie_y_only;
      } else if ((dx > 0.0) == (dy > 0.0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  const double n1 = static_cast<double>(concordant + discordant + tie_y_only);
  const double n2 = static_cast<double>(concordant + discordant + tie_x_only);
  return static_cast<double>(concordant - discordant) / std::sqrt(n1 * n2);
}

/// ECE with bins ((m-1)/M, m/M] located by linear search over bin edges.
inline double ece(const std::vector<std::pair<double, bool>>& points, std::size_t bins) {
  double total = 0.0;
  for (std::size_t m = 0; m < bins; ++m) {
    const double lo = static_cast<double>(m) / static_cast<double>(bins);
    const double hi = static_cast<double>(m + 1) / static_cast<double>(bins);
    double n = 0.0;
    double conf = 0.0;
    double acc = 0.0;
    for (const auto& [c, ok] : points) {
      const bool in = (m == 0) ? (c <= hi) : (c > lo && c <= hi);
      if (!in) continue;
      n += 1.0;
      conf += c;
      acc += ok ? 1.0 : 0.0;
    }
    if (n > 0.0) total += n / static_cast<double>(points.size()) * std::abs(acc / n - conf / n);
  }
  return total;
}

/// ACE from explicit per-class sorted columns and explicit range boundaries.
inline double ace(const std::vector<std::vector<double>>& probs, const std::vector<int>& gold, std::size_t ranges) {
  const std::size_t k = probs.front().size();
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<std::pair<double, double>> col;
    for (std::size_t i = 0; i < probs.size(); ++i) col.emplace_back(probs[i][c], gold[i] == static_cast<int>(c) ? 1.0 : 0.0);
    std::stable_sort(col.begin(), col.end(), [](auto& a, auto& b) { return a.first < b.first; });
    std::vector<std::size_t> sizes(ranges, col.size() / ranges);
    for (std::size_t r = 0; r < col.size() % ranges; ++r) ++sizes[r];
    std::size_t at = 0;
    for (std::size_t r = 0; r < ranges; ++r) {
      double conf = 0.0;
      double acc = 0.0;
      for (std::size_t i = 0; i < sizes[r]; ++i, ++at) {
        conf += col[at].first;
        acc += col[at].second;
      }
      total += std::abs(acc - conf) / static_cast<double>(sizes[r]);
    }
  }
  return total / static_cast<double>(k * ranges);
}

/// log N(x; mu, diag-free 2x2 covariance) in closed form.
inline double gaussian_logpdf_2d(double x0, double x1, double m0, double m1, double s00, double s01, double s11) {
  const double det = s00 * s11 - s01 * s01;
  const double d0 = x0 - m0;
  const double d1 = x1 - m1;
  const double maha = (s11 * d0 * d0 - 2.0 * s01 * d0 * d1 + s00 * d1 * d1) / det;
  return -0.5 * maha - 0.5 * std::log(det) - std::log(2.0 * std::numbers::pi);
}

/// Violation ratio with type-1 quantiles found by counting, on the midpoint grid.
inline double violation_ratio(std::vector<double> a, std::vector<double> b, std::size_t grid) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  auto q = [](const std::vector<double>& s, double t) {
    // smallest x with F(x) >= t
    for (double x : s) {
      double f = 0.0;
      for (double y : s) f += y <= x ? 1.0 : 0.0;
      if (f / static_cast<double>(s.size()) >= t) return x;
    }
    return s.back();
  };
  double viol = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < grid; ++i) {
    const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(grid);
    const double d = q(a, t) - q(b, t);
    total += d * d;
    if (d < 0.0) viol += d * d;
  }
  return total == 0.0 ? 0.5 : viol / total;
}

}  // namespace oracle
