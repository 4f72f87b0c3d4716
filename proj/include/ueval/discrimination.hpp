#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ueval/core.hpp"
#include "ueval/metrics.hpp"

namespace ueval {

/// Area under the ROC curve with OOD as the positive class; scores in uncertainty
/// orientation. Mann-Whitney form with ties credited 1/2, O(n log n).
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

/// Average precision with OOD positive: sum_i (R_i - R_{i-1}) P_i over descending
/// distinct-score thresholds (tied scores enter together). No interpolation.
double aupr(std::span<const double> id_scores, std::span<const double> ood_scores);

/// Kendall's tau-b, O(n log n) (Knight's merge-sort algorithm).
/// Throws DataError when either variable is constant (tau-b undefined) or n < 2.
double kendall_tau(std::span<const double> xs, std::span<const double> ys);

enum class TauLevel { token, sequence };

/// How token-level tau is formed. pooled: one tau over all tokens of the split.
/// per_sequence_mean: mean of per-record taus over records where tau is defined.
enum class TokenTauMode { pooled, per_sequence_mean };

/// Per-position NLL of the mean distribution at every unmasked position, per record.
std::vector<std::vector<double>> token_losses(const Dataset& dataset);

/// Kendall tau between uncertainty-oriented scores and losses. Token level pairs every
/// unmasked token; sequence level pairs aggregated scores with sequence_loss.
/// Requires gold labels on every record.
double loss_correlation(const Dataset& dataset, const MetricSeries& series, TauLevel level,
                        TokenTauMode mode = TokenTauMode::pooled);

struct DiscriminationReport {
  std::optional<double> auroc;
  std::optional<double> aupr;
  std::optional<double> token_tau;
  std::optional<double> sequence_tau;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
};

}  // namespace ueval
