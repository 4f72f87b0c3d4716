#include "ueval/aso.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "ueval/error.hpp"
#include "ueval/parallel.hpp"
#include "ueval/random.hpp"

namespace ueval {

namespace {

std::vector<double> sorted_copy(std::span<const double> x) {
  std::vector<double> v(x.begin(), x.end());
  for (double s : v)
    if (!std::isfinite(s)) throw DataError("ASO scores must be finite");
  std::sort(v.begin(), v.end());
  return v;
}

// Left-continuous inverse of the empirical CDF of sorted `x` at t in (0, 1).
double quantile(std::span<const double> x, double t) {
  const auto n = static_cast<double>(x.size());
  auto idx = static_cast<std::size_t>(std::ceil(t * n));
  idx = std::clamp<std::size_t>(idx, 1, x.size());
  return x[idx - 1];
}

double resampled_ratio(std::span<const double> a, std::span<const double> b, std::size_t grid,
                       std::uint64_t seed, std::size_t index) {
  Rng rng = Rng::stream(seed, index);
  std::vector<double> ra(a.size());
  std::vector<double> rb(b.size());
  for (double& x : ra) x = a[rng.below(a.size())];
  for (double& x : rb) x = b[rng.below(b.size())];
  std::sort(ra.begin(), ra.end());
  std::sort(rb.begin(), rb.end());
  return violation_ratio_sorted(ra, rb, grid);
}

void check_inputs(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw DataError(fmt::format("ASO needs at least two scores per side, got {} and {}", a.size(), b.size()));
}

}  // namespace

void AsoConfig::validate() const {
  if (!(confidence_alpha > 0.0 && confidence_alpha < 1.0))
    throw ConfigError(fmt::format("ASO confidence level {} outside (0, 1)", confidence_alpha));
  if (!(decision_threshold > 0.0 && decision_threshold <= 0.5))
    throw ConfigError(fmt::format("ASO decision threshold {} outside (0, 0.5]", decision_threshold));
  if (n_bootstrap < 100) throw ConfigError("ASO needs at least 100 bootstrap resamples");
  if (quantile_grid < 1) throw ConfigError("ASO quantile grid must be positive");
}

double violation_ratio_sorted(std::span<const double> a, std::span<const double> b, std::size_t grid) {
  if (a.empty() || b.empty()) throw DataError("violation ratio of an empty score list");
  if (grid == 0) throw ConfigError("quantile grid must be positive");
  double violation = 0.0;
  double distance = 0.0;
  for (std::size_t i = 0; i < grid; ++i) {
    const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(grid);
    const double diff = quantile(a, t) - quantile(b, t);
    const double sq = diff * diff;
    distance += sq;
    if (diff < 0.0) violation += sq;
  }
  if (distance == 0.0) return 0.5;
  return violation / distance;
}

double violation_ratio(std::span<const double> a, std::span<const double> b, std::size_t grid) {
  if (a.empty() || b.empty()) throw DataError("violation ratio of an empty score list");
  const auto sa = sorted_copy(a);
  const auto sb = sorted_copy(b);
  return violation_ratio_sorted(sa, sb, grid);
}

std::vector<double> bootstrap_violation_ratios(std::span<const double> a, std::span<const double> b,
                                               const AsoConfig& config) {
  std::vector<double> out(config.n_bootstrap);
  parallel::for_each_index(out.size(), [&](std::size_t i) {
    out[i] = resampled_ratio(a, b, config.quantile_grid, config.seed, i);
  });
  return out;
}

std::vector<double> serial::bootstrap_violation_ratios(std::span<const double> a, std::span<const double> b,
                                                       const AsoConfig& config) {
  std::vector<double> out;
  out.reserve(config.n_bootstrap);
  for (std::size_t i = 0; i < config.n_bootstrap; ++i)
    out.push_back(resampled_ratio(a, b, config.quantile_grid, config.seed, i));
  return out;
}

AsoResult aso_min_epsilon(std::span<const double> a, std::span<const double> b, const AsoConfig& config) {
  config.validate();
  check_inputs(a, b);
  const auto sa = sorted_copy(a);
  const auto sb = sorted_copy(b);

  AsoResult res;
  res.n_a = a.size();
  res.n_b = b.size();
  res.epsilon_hat = violation_ratio_sorted(sa, sb, config.quantile_grid);

  auto deviations = bootstrap_violation_ratios(sa, sb, config);
  for (double& d : deviations) d -= res.epsilon_hat;
  std::sort(deviations.begin(), deviations.end());
  const double correction = std::max(0.0, quantile(deviations, 1.0 - config.confidence_alpha));
  res.epsilon_min = std::clamp(res.epsilon_hat + correction, 0.0, 1.0);
  res.dominant = res.epsilon_min <= config.decision_threshold;
  return res;
}

DominanceMatrix dominance_matrix(const std::vector<ScoreGroup>& groups, const AsoConfig& config) {
  if (groups.size() < 2) throw ConfigError("model comparison needs at least two score groups");
  const std::size_t g = groups.size();
  DominanceMatrix m;
  m.results.assign(g, std::vector<AsoResult>(g));
  for (const auto& grp : groups) m.names.push_back(grp.name);
  for (std::size_t i = 0; i < g; ++i)
    for (std::size_t j = 0; j < g; ++j) {
      if (i == j) continue;
      AsoConfig pair = config;
      pair.seed = Rng::stream(config.seed, i * g + j).next();
      m.results[i][j] = aso_min_epsilon(groups[i].scores, groups[j].scores, pair);
    }
  m.dominant_over_all.assign(g, true);
  for (std::size_t i = 0; i < g; ++i)
    for (std::size_t j = 0; j < g; ++j)
      if (i != j && !m.results[i][j].dominant) m.dominant_over_all[i] = false;
  return m;
}

}  // namespace ueval
