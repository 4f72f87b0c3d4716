#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <json.hpp>

#include "ueval/core.hpp"
#include "ueval/sampler.hpp"

namespace ueval {

/// Parameters of the synthetic dump generator.
///
/// Each position draws a tilt class c uniformly and a probability vector
/// p ~ Dirichlet(dirichlet_base + concentration * e_c). With `calibrated` the gold label is
/// drawn from p itself, so the predictions are calibrated by construction; otherwise the gold
/// label is argmax p. Logits are ln p shifted so the largest is 0. With S > 1 each sample
/// perturbs ln p by Gaussian noise of scale `intra_sample_noise` before renormalizing.
struct SynthSpec {
  std::size_t n_id = 1000;
  std::size_t n_ood = 1000;
  std::size_t n_train = 0;
  std::size_t classes = 10;
  std::size_t samples = 1;
  std::size_t steps = 1;
  double id_concentration = 20.0;
  double ood_concentration = 2.0;
  double dirichlet_base = 1.0;
  double intra_sample_noise = 0.0;
  bool calibrated = true;
  std::uint64_t seed = 0;
  std::size_t feature_dim = 0;
  double feature_separation = 4.0;
  double ood_feature_shift = 6.0;

  /// Throws ConfigError.
  void validate() const;
};

nlohmann::ordered_json to_json(const SynthSpec& spec);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
SynthSpec synth_spec_from_json(const nlohmann::json& j, SynthSpec base = {});

/// Ground truth the generator can state about its own output.
struct SynthTruth {
  /// AUROC of sequence-level (mean-aggregated) predictive entropy and max_prob, computed
  /// from the generator's own probability vectors. Absent without an OOD split.
  std::optional<double> auroc_entropy;
  std::optional<double> auroc_max_prob;
  double id_mean_confidence = 0.0;
  double id_accuracy = 0.0;
};

struct SynthOutput {
  Dataset id;
  Dataset ood;
  Dataset train;
  SynthTruth truth;
};

/// n_id calibrated ID records (forces calibrated = true).
Dataset gen_calibrated(const SynthSpec& spec);

/// ID records at id_concentration and OOD records at ood_concentration, plus n_train training
/// records when requested, and the generator's own AUROC targets.
SynthOutput gen_id_ood(const SynthSpec& spec);

/// ID records with S >= 2 samples around a common base distribution.
Dataset gen_multisample(const SynthSpec& spec);

nlohmann::ordered_json manifest_json(const SynthSpec& spec, const SynthTruth& truth);

/// Writes id_test.jsonl, ood_test.jsonl (n_ood > 0), train.jsonl (n_train > 0) and
/// manifest.json into `dir`.
void write_synth(const std::filesystem::path& dir, const SynthSpec& spec, const SynthOutput& out);

/// Synthetic corpus for sampler tests: skewed label frequencies, lengths between min and max.
struct CorpusSpec {
  std::size_t n = 10000;
  std::size_t labels = 5;
  std::size_t vocabulary = 500;
  std::size_t min_length = 3;
  std::size_t max_length = 40;
  CorpusTask task = CorpusTask::sequence_cls;
  std::uint64_t seed = 0;
};

Corpus gen_corpus(const CorpusSpec& spec);

}  // namespace ueval
