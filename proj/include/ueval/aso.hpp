#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ueval {

struct AsoConfig {
  double confidence_alpha = 0.05;
  double decision_threshold = 0.3;
  std::size_t n_bootstrap = 1000;
  std::size_t quantile_grid = 1000;
  std::uint64_t seed = 1234;

  /// Throws ConfigError unless 0 < alpha < 1, threshold in (0, 0.5], n_bootstrap >= 100
  /// and quantile_grid >= 1.
  void validate() const;
};

struct AsoResult {
  double epsilon_hat = 0.0;  // violation ratio of "a dominates b"
  double epsilon_min = 0.0;  // bootstrap upper confidence bound on the violation ratio
  bool dominant = false;     // epsilon_min <= decision_threshold
  std::size_t n_a = 0;
  std::size_t n_b = 0;
};

/// Share of the squared quantile-function distance between a and b located where
/// a's quantile function lies below b's (higher scores are better). Quantile functions are
/// the left-continuous inverses of the empirical CDFs evaluated at the midpoints of `grid`
/// equal cells of (0, 1). Returns 0.5 when the distance is zero.
double violation_ratio(std::span<const double> a, std::span<const double> b, std::size_t grid = 1000);

/// Same, for inputs already sorted ascending.
double violation_ratio_sorted(std::span<const double> a, std::span<const double> b, std::size_t grid);

/// Violation ratios of n_bootstrap with-replacement resamples of (a, b). Resample i
/// draws from its own stream derived from (seed, i); parallel over resamples.
std::vector<double> bootstrap_violation_ratios(std::span<const double> a, std::span<const double> b,
                                               const AsoConfig& config);

namespace serial {
std::vector<double> bootstrap_violation_ratios(std::span<const double> a, std::span<const double> b,
                                               const AsoConfig& config);
}

/// Almost stochastic order test of "a dominates b":
/// epsilon_min = clamp(eps_hat + max(0, q_{1-alpha}(eps* - eps_hat)), 0, 1).
/// Throws DataError when either side has fewer than two scores.
AsoResult aso_min_epsilon(std::span<const double> a, std::span<const double> b, const AsoConfig& config);

struct ScoreGroup {
  std::string name;
  std::vector<double> scores;
};

struct DominanceMatrix {
  std::vector<std::string> names;
  /// results[i][j] tests "i dominates j"; the diagonal is left default-initialized.
  std::vector<std::vector<AsoResult>> results;
  /// dominant_over_all[i]: i almost stochastically dominates every other group.
  std::vector<bool> dominant_over_all;
};

/// Runs the test for every ordered pair. Pair (i, j) uses a seed derived from
/// (config.seed, i * groups + j).
DominanceMatrix dominance_matrix(const std::vector<ScoreGroup>& groups, const AsoConfig& config);

}  // namespace ueval
