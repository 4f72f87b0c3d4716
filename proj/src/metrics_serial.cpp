#include <cmath>
#include <limits>

#include "ueval/density.hpp"
#include "ueval/error.hpp"
#include "ueval/metrics.hpp"

namespace ueval::serial {

namespace {

double token_score(const PredictionRecord& r, std::size_t t, MetricName metric,
                   const DensityModel* density, bool& single_sample) {
  switch (metric) {
    case MetricName::max_prob: return max_prob(step_distribution(r, t));
    case MetricName::softmax_gap: return softmax_gap(step_distribution(r, t));
    case MetricName::predictive_entropy: return predictive_entropy(step_distribution(r, t));
    case MetricName::dempster_shafer: {
      double acc = 0.0;
      for (std::size_t s = 0; s < r.samples; ++s) acc += dempster_shafer(r.scores(s, t));
      return acc / static_cast<double>(r.samples);
    }
    case MetricName::class_variance: {
      auto stat = class_variance(step_samples(r, t));
      single_sample = stat.single_sample;
      return stat.value;
    }
    case MetricName::mutual_information: {
      auto mi = mutual_information(step_samples(r, t));
      single_sample = mi.single_sample;
      return mi.value;
    }
    case MetricName::log_density: return density->score(r.step_features(t));
  }
  throw ConfigError("unhandled metric");
}

}  // namespace

MetricSeries compute_series(const Dataset& ds, MetricName metric, Aggregation mode,
                            const DensityModel* density) {
  if (metric == MetricName::dempster_shafer && !ds.has_logits())
    throw UnavailableError("metric 'dempster_shafer' needs logits, but the dump holds probabilities");
  if (metric == MetricName::log_density && (density == nullptr || !ds.has_features()))
    throw UnavailableError("metric 'log_density' needs features and a fitted density model");

  MetricSeries series;
  series.metric = metric_id(metric);
  series.aggregation = mode;
  for (const auto& r : ds.records) {
    std::vector<double> row;
    for (std::size_t t = 0; t < r.steps; ++t) {
      if (!r.mask[t]) continue;
      bool flagged = false;
      row.push_back(token_score(r, t, metric, density, flagged));
      series.single_sample_tokens += flagged ? 1 : 0;
    }
    series.sequence_scores.push_back(row.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                 : aggregate_sequence(row, mode));
    series.token_scores.push_back(std::move(row));
  }
  return series;
}

}  // namespace ueval::serial
