#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ueval/core.hpp"

namespace ueval {

enum class CorpusTask { sequence_cls, token_cls };

std::string_view to_string(CorpusTask task);
CorpusTask parse_corpus_task(std::string_view name);

/// One corpus sequence. `labels` holds the single sequence label for sequence_cls and one
/// label per token for token_cls. `source` keeps the original JSON line (if loaded from
/// a file) so sub-sampled output reproduces it verbatim.
struct CorpusRecord {
  std::vector<std::string> tokens;
  std::vector<int> labels;
  std::string source;

  std::size_t length() const { return tokens.size(); }
};

struct Corpus {
  std::vector<CorpusRecord> records;
  CorpusTask task = CorpusTask::sequence_cls;

  std::size_t label_count() const;
};

/// JSON Lines with "tokens" (string array) and either "label" (int) or "labels" (int array).
/// The task is inferred; mixing the two label forms is an error.
Corpus read_corpus(std::istream& in);
Corpus load_corpus(const std::filesystem::path& path);
/// Writes each record's source line (or a fresh encoding when it has none).
void write_corpus(std::ostream& out, std::span<const CorpusRecord> records, CorpusTask task);

struct SamplePlan {
  std::size_t target_size = 0;
  std::uint64_t seed = 0;
  CorpusTask task = CorpusTask::sequence_cls;
};

/// Label-then-length stratified draw without replacement. Returns corpus indices in draw
/// order. Labels are drawn by corpus label frequency, lengths by their frequency inside the
/// label bucket, and the sequence uniformly from the (label, length) bucket. Exhausted
/// buckets drop out and the remaining weights are renormalized.
std::vector<std::size_t> select_sequence_cls(const Corpus& corpus, const SamplePlan& plan);
std::vector<CorpusRecord> subsample_sequence_cls(const Corpus& corpus, const SamplePlan& plan);

/// sum_k p_corpus(k) ln p_seq(k), with the sequence's label distribution smoothed by
/// adding 1e-10 to every class and renormalizing. Always <= 0.
double alignment_score(std::span<const int> sequence_labels, const Distribution& corpus_labels);

/// Sampling weights for one length bucket: min-max normalized scores renormalized to sum
/// to 1; uniform when every score is equal.
std::vector<double> bucket_weights(std::span<const double> scores);

/// Length-stratified draw without replacement. Inside a length bucket a sequence's weight is
/// its min-max normalized alignment score among the bucket's remaining sequences (uniform
/// when they are all equal).
std::vector<std::size_t> select_token_cls(const Corpus& corpus, const SamplePlan& plan);
std::vector<CorpusRecord> subsample_token_cls(const Corpus& corpus, const SamplePlan& plan);

/// Dispatches on plan.task.
std::vector<std::size_t> select(const Corpus& corpus, const SamplePlan& plan);

/// Label distribution of a corpus (token labels pooled for token_cls), over `classes` classes.
Distribution label_distribution(std::span<const CorpusRecord> records, std::size_t classes);

/// Jensen-Shannon divergence in nats; inputs must have equal length.
double js_divergence(std::span<const double> p, std::span<const double> q);

struct FrequencyTable {
  std::vector<std::string> keys;
  std::vector<double> freq_a;
  std::vector<double> freq_b;
};

struct DistributionComparison {
  double length_js = 0.0;
  double label_js = 0.0;
  double top_type_js = 0.0;
  std::size_t top_k = 50;
  FrequencyTable lengths;
  FrequencyTable labels;
  FrequencyTable types;  // a's top-k types plus a trailing "<other>" row
};

/// Compares sequence lengths, labels and the relative frequencies of a's top_k types
/// between two corpora. Throws DataError on empty input.
DistributionComparison compare_distributions(std::span<const CorpusRecord> a,
                                             std::span<const CorpusRecord> b, std::size_t top_k = 50);

}  // namespace ueval
