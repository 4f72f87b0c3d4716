#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ueval {

/// Gold label that marks a position excluded from evaluation.
inline constexpr int kIgnoreLabel = -100;

/// Floor applied to probabilities before any logarithm.
inline constexpr double kProbFloor = 1e-12;

enum class Split { train, id_test, ood_test };
enum class Task { sequence_classification, token_classification };

std::string_view to_string(Split split);
std::string_view to_string(Task task);
Split parse_split(std::string_view name);

/// Categorical distribution over K classes.
struct Distribution {
  std::vector<double> probs;

  std::size_t size() const noexcept { return probs.size(); }
  double operator[](std::size_t k) const { return probs[k]; }
};

/// The S predictive distributions (ensemble members, MC-dropout passes) for one position.
struct SampleSet {
  std::vector<Distribution> dists;

  std::size_t size() const noexcept { return dists.size(); }
  std::size_t classes() const noexcept { return dists.empty() ? 0 : dists.front().size(); }
};

/// What the prediction tensor of a record holds.
enum class ScoreKind { logits, probabilities };

/// One instance of a prediction dump.
///
/// `values` is a dense [samples x steps x classes] tensor, row-major. Probability-only
/// dumps are accepted; for those `kind == ScoreKind::probabilities` and logit-based
/// metrics are unavailable. `mask[t]` is true when position t takes part in evaluation.
///
/// Unlabeled records (no gold in the dump, e.g. OOD sets without annotation) keep
/// `gold` filled with kIgnoreLabel and take their mask from the explicit mask only;
/// they are scored for uncertainty but skipped by anything that needs a label.
struct PredictionRecord {
  std::string id;
  Split split = Split::id_test;
  std::size_t samples = 0;
  std::size_t steps = 0;
  std::size_t classes = 0;
  ScoreKind kind = ScoreKind::logits;
  std::vector<double> values;
  std::vector<int> gold;
  bool labeled = true;
  std::vector<bool> mask;
  std::size_t feature_dim = 0;
  std::vector<double> features;  // [steps x feature_dim]

  bool has_logits() const noexcept { return kind == ScoreKind::logits; }
  bool has_features() const noexcept { return feature_dim > 0; }

  std::span<const double> scores(std::size_t sample, std::size_t step) const;
  std::span<const double> step_features(std::size_t step) const;

  std::size_t unmasked_count() const;
  std::vector<std::size_t> unmasked_steps() const;
};

/// Records of one split, all sharing the class count.
struct Dataset {
  std::vector<PredictionRecord> records;
  std::size_t class_count = 0;
  Task task = Task::sequence_classification;

  std::size_t unmasked_count() const;
  bool has_logits() const;
  bool has_features() const;
  bool labeled() const;
};

/// Checks a record's invariants, throwing DataError naming the record.
/// Intersects any explicit mask with the ignore-label mask (or derives it when absent).
void finalize_record(PredictionRecord& record);

/// Checks cross-record invariants and infers the task (all T = 1 means sequence classification).
void finalize_dataset(Dataset& dataset);

/// Max-subtracted softmax. Throws DataError on non-finite input.
Distribution softmax(std::span<const double> logits);

/// Negative log-likelihood of `gold` in nats, with probs[gold] floored at kProbFloor.
double token_nll(const Distribution& dist, int gold);

/// Elementwise arithmetic mean of the member distributions.
Distribution mean_distribution(const SampleSet& samples);

/// Predictive distribution of one sample at one step.
Distribution sample_distribution(const PredictionRecord& record, std::size_t sample,
                                 std::size_t step);
SampleSet step_samples(const PredictionRecord& record, std::size_t step);

/// Mean of the sample distributions at `step`; equals the single distribution when S = 1.
Distribution step_distribution(const PredictionRecord& record, std::size_t step);

/// Mean token NLL over unmasked steps. Throws DataError for fully masked records.
double sequence_loss(const PredictionRecord& record);

std::size_t argmax(const Distribution& dist);

}  // namespace ueval
