#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "ueval/core.hpp"

namespace ueval {

class DensityModel;

enum class MetricName {
  max_prob,
  softmax_gap,
  predictive_entropy,
  dempster_shafer,
  class_variance,
  mutual_information,
  log_density,
};

/// Whether larger raw values mean more confidence or more uncertainty.
enum class Polarity { confidence, uncertainty };

/// single: one distribution (the sample mean for multi-sample records);
/// multi: needs the full sample set; feature: needs latent features and a density model.
enum class Arity { single, multi, feature };

struct MetricId {
  MetricName name;
  Polarity polarity;
  Arity arity;

  friend bool operator==(const MetricId&, const MetricId&) = default;
};

MetricId metric_id(MetricName name);
/// Parses the canonical CLI identifier ("max_prob", ...). Throws ConfigError.
MetricId parse_metric(std::string_view name);
std::string_view to_string(MetricName name);
std::string_view to_string(Polarity polarity);
const std::array<MetricName, 7>& all_metric_names();

double max_prob(const Distribution& dist);
double softmax_gap(const Distribution& dist);

/// Shannon entropy in nats with 0 ln 0 = 0.
double predictive_entropy(const Distribution& dist);

/// K / (K + sum_k exp(z_k)), evaluated in log space so large logits do not overflow.
/// Unlike the softmax metrics this is not shift invariant: raising every logit lowers it.
double dempster_shafer(std::span<const double> logits);

/// Value of a multi-sample statistic. `single_sample` flags S = 1, where the value is 0.
struct SampleStatistic {
  double value = 0.0;
  bool single_sample = false;
};

/// Mean over classes of the population variance (divide by S) across samples.
SampleStatistic class_variance(const SampleSet& samples);

/// Entropy of the mean distribution minus the mean per-sample entropy.
struct MutualInformation {
  double value = 0.0;          // clamped to >= 0
  double total_entropy = 0.0;  // H[mean distribution]
  double aleatoric = 0.0;      // mean per-sample entropy
  bool single_sample = false;
};

/// Throws NumericalError when the unclamped value is below -1e-8.
MutualInformation mutual_information(const SampleSet& samples);

enum class Aggregation { mean, max };

Aggregation parse_aggregation(std::string_view name);
std::string_view to_string(Aggregation mode);

/// Step-to-sequence reduction. Throws DataError on an empty list.
double aggregate_sequence(std::span<const double> step_scores, Aggregation mode);

/// Raw scores of one metric over a dataset, in canonical record order.
///
/// token_scores[i] holds record i's unmasked positions in step order. sequence_scores[i]
/// is NaN for records with no unmasked positions.
struct MetricSeries {
  MetricId metric{};
  Aggregation aggregation = Aggregation::mean;
  std::vector<std::vector<double>> token_scores;
  std::vector<double> sequence_scores;
  std::size_t single_sample_tokens = 0;

  /// Maps a raw score to uncertainty orientation (confidence metrics are negated).
  double oriented(double raw) const {
    return metric.polarity == Polarity::confidence ? -raw : raw;
  }
  /// All token scores flattened in record order, uncertainty orientation.
  std::vector<double> oriented_token_scores() const;
  /// Sequence scores of records with at least one unmasked position, uncertainty orientation.
  std::vector<double> oriented_sequence_scores() const;
};

/// Scores every unmasked position of every record, parallel over records.
///
/// Throws UnavailableError when the metric's inputs are missing: logits for
/// dempster_shafer; features and `density` for log_density.
MetricSeries compute_series(const Dataset& dataset, MetricName metric, Aggregation mode,
                            const DensityModel* density = nullptr);

namespace serial {

/// Reference implementation of compute_series: one record at a time, built from the
/// per-operation functions above. Kept for testing the parallel kernel.
MetricSeries compute_series(const Dataset& dataset, MetricName metric, Aggregation mode,
                            const DensityModel* density = nullptr);

}  // namespace serial

}  // namespace ueval
