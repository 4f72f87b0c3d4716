#include "ueval/metrics.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <fmt/format.h>

#include "metrics_detail.hpp"
#include "ueval/density.hpp"
#include "ueval/error.hpp"
#include "ueval/parallel.hpp"

namespace ueval {

namespace {

constexpr std::array<MetricName, 7> kAllMetrics = {
    MetricName::max_prob,         MetricName::softmax_gap,        MetricName::predictive_entropy,
    MetricName::dempster_shafer,  MetricName::class_variance,     MetricName::mutual_information,
    MetricName::log_density,
};

}  // namespace

MetricId metric_id(MetricName name) {
  switch (name) {
    case MetricName::max_prob:
    case MetricName::softmax_gap:
      return {name, Polarity::confidence, Arity::single};
    case MetricName::predictive_entropy:
    case MetricName::dempster_shafer:
      return {name, Polarity::uncertainty, Arity::single};
    case MetricName::class_variance:
    case MetricName::mutual_information:
      return {name, Polarity::uncertainty, Arity::multi};
    case MetricName::log_density:
      return {name, Polarity::confidence, Arity::feature};
  }
  throw ConfigError("unknown metric");
}

std::string_view to_string(MetricName name) {
  switch (name) {
    case MetricName::max_prob: return "max_prob";
    case MetricName::softmax_gap: return "softmax_gap";
    case MetricName::predictive_entropy: return "predictive_entropy";
    case MetricName::dempster_shafer: return "dempster_shafer";
    case MetricName::class_variance: return "class_variance";
    case MetricName::mutual_information: return "mutual_information";
    case MetricName::log_density: return "log_density";
  }
  return "unknown";
}

std::string_view to_string(Polarity polarity) {
  return polarity == Polarity::confidence ? "confidence" : "uncertainty";
}

MetricId parse_metric(std::string_view name) {
  for (auto m : kAllMetrics)
    if (to_string(m) == name) return metric_id(m);
  throw ConfigError(fmt::format("unknown metric '{}'", name));
}

const std::array<MetricName, 7>& all_metric_names() { return kAllMetrics; }

double max_prob(const Distribution& dist) { return detail::max_of(dist.probs); }

double softmax_gap(const Distribution& dist) {
  if (dist.size() < 2) throw DataError("softmax gap needs at least two classes");
  return detail::top_gap(dist.probs);
}

double predictive_entropy(const Distribution& dist) { return detail::entropy(dist.probs); }

double dempster_shafer(std::span<const double> logits) {
  if (logits.empty()) throw DataError("Dempster-Shafer score of an empty logit vector");
  for (double z : logits)
    if (!std::isfinite(z)) throw DataError("Dempster-Shafer input is not finite");
  return detail::dempster_shafer(logits);
}

SampleStatistic class_variance(const SampleSet& samples) {
  const Distribution mean = mean_distribution(samples);
  SampleStatistic out;
  if (samples.size() == 1) {
    out.single_sample = true;
    return out;
  }
  const auto s = static_cast<double>(samples.size());
  double total = 0.0;
  for (std::size_t k = 0; k < mean.size(); ++k) {
    double var = 0.0;
    for (const auto& d : samples.dists) {
      const double diff = d.probs[k] - mean.probs[k];
      var += diff * diff;
    }
    total += var / s;
  }
  out.value = total / static_cast<double>(mean.size());
  return out;
}

MutualInformation mutual_information(const SampleSet& samples) {
  const Distribution mean = mean_distribution(samples);
  MutualInformation mi;
  mi.total_entropy = detail::entropy(mean.probs);
  double aleatoric = 0.0;
  for (const auto& d : samples.dists) aleatoric += detail::entropy(d.probs);
  mi.aleatoric = aleatoric / static_cast<double>(samples.size());
  mi.single_sample = samples.size() == 1;
  if (mi.single_sample) {
    mi.value = 0.0;
    return mi;
  }
  const double raw = mi.total_entropy - mi.aleatoric;
  if (raw < -1e-8)
    throw NumericalError(fmt::format("mutual information {} is negative beyond tolerance", raw));
  mi.value = std::max(raw, 0.0);
  return mi;
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "mean") return Aggregation::mean;
  if (name == "max") return Aggregation::max;
  throw ConfigError(fmt::format("unknown aggregation '{}' (expected mean or max)", name));
}

std::string_view to_string(Aggregation mode) { return mode == Aggregation::mean ? "mean" : "max"; }

double aggregate_sequence(std::span<const double> step_scores, Aggregation mode) {
  if (step_scores.empty()) throw DataError("cannot aggregate an empty score list");
  if (mode == Aggregation::max) return detail::max_of(step_scores);
  double sum = 0.0;
  for (double x : step_scores) sum += x;
  return sum / static_cast<double>(step_scores.size());
}

std::vector<double> MetricSeries::oriented_token_scores() const {
  std::vector<double> out;
  for (const auto& row : token_scores)
    for (double x : row) out.push_back(oriented(x));
  return out;
}

std::vector<double> MetricSeries::oriented_sequence_scores() const {
  std::vector<double> out;
  out.reserve(sequence_scores.size());
  for (double x : sequence_scores)
    if (!std::isnan(x)) out.push_back(oriented(x));
  return out;
}

namespace {

void check_available(const Dataset& ds, MetricName metric, const DensityModel* density) {
  if (metric == MetricName::dempster_shafer && !ds.has_logits())
    throw UnavailableError("metric 'dempster_shafer' needs logits, but the dump holds probabilities");
  if (metric == MetricName::log_density) {
    if (density == nullptr)
      throw UnavailableError("metric 'log_density' needs a fitted density model (train dump with features)");
    if (!ds.has_features())
      throw UnavailableError("metric 'log_density' needs features in every record");
  }
}

// Per-thread buffers for the fused kernel.
struct Scratch {
  std::vector<double> probs;  // S x K
  std::vector<double> mean;   // K
};

double fused_token_score(const PredictionRecord& r, std::size_t t, MetricName metric,
                         const DensityModel* density, Scratch& buf, bool& single_sample) {
  const std::size_t S = r.samples;
  const std::size_t K = r.classes;
  if (metric == MetricName::log_density) return density->score(r.step_features(t));
  if (metric == MetricName::dempster_shafer) {
    double acc = 0.0;
    for (std::size_t s = 0; s < S; ++s) acc += detail::dempster_shafer(r.scores(s, t));
    return acc / static_cast<double>(S);
  }

  buf.probs.resize(S * K);
  buf.mean.assign(K, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    std::span<double> row(buf.probs.data() + s * K, K);
    auto scores = r.scores(s, t);
    if (r.has_logits())
      detail::softmax_into(scores, row);
    else
      std::copy(scores.begin(), scores.end(), row.begin());
    for (std::size_t k = 0; k < K; ++k) buf.mean[k] += row[k];
  }
  if (S > 1) {
    const double inv = 1.0 / static_cast<double>(S);
    for (double& m : buf.mean) m *= inv;
  }

  switch (metric) {
    case MetricName::max_prob: return detail::max_of(buf.mean);
    case MetricName::softmax_gap: return detail::top_gap(buf.mean);
    case MetricName::predictive_entropy: return detail::entropy(buf.mean);
    case MetricName::class_variance: {
      if (S == 1) {
        single_sample = true;
        return 0.0;
      }
      double total = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        double var = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
          const double diff = buf.probs[s * K + k] - buf.mean[k];
          var += diff * diff;
        }
        total += var / static_cast<double>(S);
      }
      return total / static_cast<double>(K);
    }
    case MetricName::mutual_information: {
      if (S == 1) {
        single_sample = true;
        return 0.0;
      }
      double aleatoric = 0.0;
      for (std::size_t s = 0; s < S; ++s)
        aleatoric += detail::entropy(std::span<const double>(buf.probs.data() + s * K, K));
      const double raw = detail::entropy(buf.mean) - aleatoric / static_cast<double>(S);
      if (raw < -1e-8)
        throw NumericalError(fmt::format("record '{}' step {}: mutual information {} is negative",
                                         r.id, t, raw));
      return std::max(raw, 0.0);
    }
    default: break;
  }
  throw ConfigError("unhandled metric");
}

}  // namespace

MetricSeries compute_series(const Dataset& ds, MetricName metric, Aggregation mode,
                            const DensityModel* density) {
  check_available(ds, metric, density);
  const std::size_t n = ds.records.size();
  MetricSeries series;
  series.metric = metric_id(metric);
  series.aggregation = mode;
  series.token_scores.resize(n);
  series.sequence_scores.assign(n, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::size_t> single(n, 0);

  // Exceptions must not escape an OpenMP region; the first one is rethrown afterwards.
  std::vector<std::exception_ptr> errors(n);
  parallel::for_each_index(n, [&](std::size_t i) {
    thread_local Scratch buf;
    try {
      const auto& r = ds.records[i];
      auto& row = series.token_scores[i];
      row.clear();
      row.reserve(r.unmasked_count());
      for (std::size_t t = 0; t < r.steps; ++t) {
        if (!r.mask[t]) continue;
        bool flagged = false;
        row.push_back(fused_token_score(r, t, metric, density, buf, flagged));
        single[i] += flagged ? 1 : 0;
      }
      if (!row.empty()) series.sequence_scores[i] = aggregate_sequence(row, mode);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (std::size_t c : single) series.single_sample_tokens += c;
  return series;
}

}  // namespace ueval
