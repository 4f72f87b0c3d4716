#include "ueval/core.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "ueval/error.hpp"

namespace ueval {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::id_test: return "id_test";
    case Split::ood_test: return "ood_test";
  }
  return "unknown";
}

std::string_view to_string(Task task) {
  return task == Task::sequence_classification ? "sequence_classification"
                                               : "token_classification";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "id_test") return Split::id_test;
  if (name == "ood_test") return Split::ood_test;
  throw DataError(fmt::format("unknown split '{}'", name));
}

std::span<const double> PredictionRecord::scores(std::size_t sample, std::size_t step) const {
  return std::span<const double>(values).subspan((sample * steps + step) * classes, classes);
}

std::span<const double> PredictionRecord::step_features(std::size_t step) const {
  return std::span<const double>(features).subspan(step * feature_dim, feature_dim);
}

std::size_t PredictionRecord::unmasked_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

std::vector<std::size_t> PredictionRecord::unmasked_steps() const {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < mask.size(); ++t)
    if (mask[t]) out.push_back(t);
  return out;
}

std::size_t Dataset::unmasked_count() const {
  std::size_t n = 0;
  for (const auto& r : records) n += r.unmasked_count();
  return n;
}

bool Dataset::has_logits() const {
  return std::all_of(records.begin(), records.end(),
                     [](const PredictionRecord& r) { return r.has_logits(); });
}

bool Dataset::labeled() const {
  return !records.empty() && std::all_of(records.begin(), records.end(),
                                         [](const PredictionRecord& r) { return r.labeled; });
}

bool Dataset::has_features() const {
  return !records.empty() && std::all_of(records.begin(), records.end(),
                                         [](const PredictionRecord& r) { return r.has_features(); });
}

void finalize_record(PredictionRecord& r) {
  auto fail = [&](const std::string& what) {
    throw DataError(fmt::format("record '{}': {}", r.id, what));
  };
  if (r.samples < 1) fail("needs at least one sample");
  if (r.steps < 1) fail("needs at least one step");
  if (r.classes < 2) fail("needs at least two classes");
  if (r.values.size() != r.samples * r.steps * r.classes)
    fail(fmt::format("score tensor has {} entries, expected {}x{}x{}", r.values.size(), r.samples,
                     r.steps, r.classes));
  for (double v : r.values)
    if (!std::isfinite(v)) fail("non-finite score");
  if (r.kind == ScoreKind::probabilities) {
    for (std::size_t s = 0; s < r.samples; ++s)
      for (std::size_t t = 0; t < r.steps; ++t) {
        double sum = 0.0;
        for (double p : r.scores(s, t)) {
          if (p < 0.0 || p > 1.0) fail("probability outside [0, 1]");
          sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-6)
          fail(fmt::format("probabilities at sample {} step {} sum to {}", s, t, sum));
      }
  }
  if (!r.labeled) r.gold.assign(r.steps, kIgnoreLabel);
  if (r.gold.size() != r.steps)
    fail(fmt::format("gold has {} labels, expected {}", r.gold.size(), r.steps));
  for (int g : r.gold)
    if (g != kIgnoreLabel && (g < 0 || static_cast<std::size_t>(g) >= r.classes))
      fail(fmt::format("gold label {} outside [0, {})", g, r.classes));
  if (r.mask.empty()) {
    r.mask.assign(r.steps, true);
  } else if (r.mask.size() != r.steps) {
    fail(fmt::format("mask has {} entries, expected {}", r.mask.size(), r.steps));
  }
  if (r.labeled)
    for (std::size_t t = 0; t < r.steps; ++t)
      if (r.gold[t] == kIgnoreLabel) r.mask[t] = false;
  if (r.feature_dim > 0) {
    if (r.features.size() != r.steps * r.feature_dim)
      fail(fmt::format("features have {} rows, expected {}", r.features.size() / r.feature_dim,
                       r.steps));
    for (double v : r.features)
      if (!std::isfinite(v)) fail("non-finite feature");
  }
}

void finalize_dataset(Dataset& ds) {
  if (ds.records.empty()) {
    ds.class_count = 0;
    return;
  }
  ds.class_count = ds.records.front().classes;
  bool all_single_step = true;
  for (const auto& r : ds.records) {
    if (r.classes != ds.class_count)
      throw DataError(fmt::format("record '{}' has {} classes, dataset has {}", r.id, r.classes,
                                  ds.class_count));
    all_single_step = all_single_step && r.steps == 1;
  }
  ds.task = all_single_step ? Task::sequence_classification : Task::token_classification;
}

Distribution softmax(std::span<const double> logits) {
  if (logits.empty()) throw DataError("softmax of an empty vector");
  for (double z : logits)
    if (!std::isfinite(z)) throw DataError("softmax input is not finite");
  const double m = *std::max_element(logits.begin(), logits.end());
  Distribution d;
  d.probs.resize(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    d.probs[k] = std::exp(logits[k] - m);
    sum += d.probs[k];
  }
  for (double& p : d.probs) p /= sum;
  return d;
}

double token_nll(const Distribution& dist, int gold) {
  if (gold == kIgnoreLabel) throw DataError("loss requested for a masked token");
  if (gold < 0 || static_cast<std::size_t>(gold) >= dist.size())
    throw DataError(fmt::format("gold label {} outside [0, {})", gold, dist.size()));
  return -std::log(std::max(dist.probs[static_cast<std::size_t>(gold)], kProbFloor));
}

Distribution mean_distribution(const SampleSet& samples) {
  if (samples.dists.empty()) throw DataError("mean of an empty sample set");
  const std::size_t k = samples.classes();
  Distribution mean;
  mean.probs.assign(k, 0.0);
  for (const auto& d : samples.dists) {
    if (d.size() != k) throw DataError("sample set members disagree on the class count");
    for (std::size_t c = 0; c < k; ++c) mean.probs[c] += d.probs[c];
  }
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (double& p : mean.probs) p *= inv;
  return mean;
}

Distribution sample_distribution(const PredictionRecord& record, std::size_t sample,
                                 std::size_t step) {
  auto scores = record.scores(sample, step);
  if (record.has_logits()) return softmax(scores);
  return Distribution{std::vector<double>(scores.begin(), scores.end())};
}

SampleSet step_samples(const PredictionRecord& record, std::size_t step) {
  SampleSet set;
  set.dists.reserve(record.samples);
  for (std::size_t s = 0; s < record.samples; ++s)
    set.dists.push_back(sample_distribution(record, s, step));
  return set;
}

Distribution step_distribution(const PredictionRecord& record, std::size_t step) {
  if (record.samples == 1) return sample_distribution(record, 0, step);
  return mean_distribution(step_samples(record, step));
}

double sequence_loss(const PredictionRecord& record) {
  if (!record.labeled) throw DataError(fmt::format("record '{}' has no gold labels", record.id));
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < record.steps; ++t) {
    if (!record.mask[t]) continue;
    total += token_nll(step_distribution(record, t), record.gold[t]);
    ++n;
  }
  if (n == 0) throw DataError(fmt::format("record '{}' has no unmasked tokens", record.id));
  return total / static_cast<double>(n);
}

std::size_t argmax(const Distribution& dist) {
  return static_cast<std::size_t>(
      std::distance(dist.probs.begin(), std::max_element(dist.probs.begin(), dist.probs.end())));
}

}  // namespace ueval
