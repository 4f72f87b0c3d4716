#include "ueval/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <fmt/format.h>

#include "ueval/dump_io.hpp"
#include "ueval/error.hpp"
#include "ueval/random.hpp"

namespace ueval {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

enum Stream : std::uint64_t { kIdStream = 0, kOodStream = 1, kTrainStream = 2 };

double entropy_of(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

// Per-record sequence-level scores kept by the generator for its own AUROC targets.
struct RecordTruth {
  double mean_entropy = 0.0;
  double mean_max_prob = 0.0;
  std::size_t correct = 0;
  double confidence_sum = 0.0;
};

class Generator {
 public:
  Generator(const SynthSpec& spec, std::uint64_t stream) : spec_(spec), rng_(Rng::stream(spec.seed, stream)) {}

  PredictionRecord record(const std::string& id, Split split, double concentration, RecordTruth& truth) {
    const std::size_t k = spec_.classes;
    const std::size_t s_count = spec_.samples;
    PredictionRecord r;
    r.id = id;
    r.split = split;
    r.samples = s_count;
    r.steps = spec_.steps;
    r.classes = k;
    r.kind = ScoreKind::logits;
    r.values.assign(s_count * spec_.steps * k, 0.0);
    r.gold.resize(spec_.steps);
    r.feature_dim = spec_.feature_dim;
    r.features.reserve(spec_.steps * spec_.feature_dim);

    std::vector<double> base(k);
    std::vector<double> logp(k);
    std::vector<double> mean_p(k);
    for (std::size_t t = 0; t < spec_.steps; ++t) {
      const auto tilt = static_cast<std::size_t>(rng_.below(k));
      double total = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        const double shape = spec_.dirichlet_base + (c == tilt ? concentration : 0.0);
        base[c] = std::max(std::gamma_distribution<double>(shape, 1.0)(rng_.engine()),
                           std::numeric_limits<double>::min());
        total += base[c];
      }
      for (double& x : base) x /= total;

      std::fill(mean_p.begin(), mean_p.end(), 0.0);
      for (std::size_t s = 0; s < s_count; ++s) {
        for (std::size_t c = 0; c < k; ++c) {
          logp[c] = std::log(base[c]);
          if (spec_.intra_sample_noise > 0.0 && s_count > 1) logp[c] += spec_.intra_sample_noise * normal_();
        }
        const double top = *std::max_element(logp.begin(), logp.end());
        double z = 0.0;
        for (std::size_t c = 0; c < k; ++c) z += std::exp(logp[c] - top);
        double* row = r.values.data() + (s * spec_.steps + t) * k;
        for (std::size_t c = 0; c < k; ++c) {
          row[c] = logp[c] - top;
          mean_p[c] += std::exp(row[c]) / z / static_cast<double>(s_count);
        }
      }

      const auto predicted = static_cast<std::size_t>(std::max_element(mean_p.begin(), mean_p.end()) - mean_p.begin());
      std::size_t gold = predicted;
      if (spec_.calibrated) {
        gold = rng_.weighted(mean_p);
        if (gold == k) gold = predicted;
      }
      r.gold[t] = static_cast<int>(gold);
      truth.mean_entropy += entropy_of(mean_p);
      truth.mean_max_prob += mean_p[predicted];
      truth.confidence_sum += mean_p[predicted];
      if (gold == predicted) ++truth.correct;

      for (std::size_t d = 0; d < spec_.feature_dim; ++d) {
        double mu = 0.0;
        if (d == gold % spec_.feature_dim)
          mu = ((gold / spec_.feature_dim) % 2 == 0 ? 1.0 : -1.0) * spec_.feature_separation;
        if (split == Split::ood_test)
          mu += spec_.ood_feature_shift / std::sqrt(static_cast<double>(spec_.feature_dim));
        r.features.push_back(mu + normal_());
      }
    }
    truth.mean_entropy /= static_cast<double>(spec_.steps);
    truth.mean_max_prob /= static_cast<double>(spec_.steps);
    finalize_record(r);
    return r;
  }

  Dataset split(Split which, std::size_t n, double concentration, std::vector<RecordTruth>* truths) {
    Dataset ds;
    ds.records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      RecordTruth truth;
      ds.records.push_back(record(fmt::format("{}-{}", to_string(which), i), which, concentration, truth));
      if (truths) truths->push_back(truth);
    }
    finalize_dataset(ds);
    return ds;
  }

 private:
  double normal_() { return std::normal_distribution<double>(0.0, 1.0)(rng_.engine()); }

  const SynthSpec& spec_;
  Rng rng_;
};

// Pair-count AUROC with OOD positive and ties credited 1/2; kept separate from the
// discrimination module so the manifest is an independent reference.
double pair_count_auroc(std::vector<double> id, const std::vector<double>& ood) {
  std::sort(id.begin(), id.end());
  double wins = 0.0;
  for (double o : ood) {
    const auto lo = std::lower_bound(id.begin(), id.end(), o);
    const auto hi = std::upper_bound(id.begin(), id.end(), o);
    wins += static_cast<double>(lo - id.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("synth spec key '{}': {}", key, e.what()));
  }
}

}  // namespace

void SynthSpec::validate() const {
  if (classes < 2) throw ConfigError("synth: need at least 2 classes");
  if (samples < 1) throw ConfigError("synth: samples must be >= 1");
  if (steps < 1) throw ConfigError("synth: steps must be >= 1");
  if (n_id < 1) throw ConfigError("synth: n_id must be >= 1");
  if (!(id_concentration > 0.0) || !std::isfinite(id_concentration))
    throw ConfigError("synth: id_concentration must be positive");
  if (!(ood_concentration > 0.0) || !std::isfinite(ood_concentration))
    throw ConfigError("synth: ood_concentration must be positive");
  if (!(dirichlet_base > 0.0) || !std::isfinite(dirichlet_base))
    throw ConfigError("synth: dirichlet_base must be positive");
  if (!(intra_sample_noise >= 0.0) || !std::isfinite(intra_sample_noise))
    throw ConfigError("synth: intra_sample_noise must be >= 0");
  if (!std::isfinite(feature_separation) || !std::isfinite(ood_feature_shift))
    throw ConfigError("synth: feature parameters must be finite");
}

ordered_json to_json(const SynthSpec& s) {
  ordered_json j;
  j["n_id"] = s.n_id;
  j["n_ood"] = s.n_ood;
  j["n_train"] = s.n_train;
  j["classes"] = s.classes;
  j["samples"] = s.samples;
  j["steps"] = s.steps;
  j["id_concentration"] = s.id_concentration;
  j["ood_concentration"] = s.ood_concentration;
  j["dirichlet_base"] = s.dirichlet_base;
  j["intra_sample_noise"] = s.intra_sample_noise;
  j["calibrated"] = s.calibrated;
  j["seed"] = s.seed;
  j["feature_dim"] = s.feature_dim;
  j["feature_separation"] = s.feature_separation;
  j["ood_feature_shift"] = s.ood_feature_shift;
  return j;
}

SynthSpec synth_spec_from_json(const json& j, SynthSpec s) {
  if (!j.is_object()) throw ConfigError("synth spec must be a JSON object");
  const auto known = to_json(s);
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw ConfigError(fmt::format("unknown synth spec key '{}'", key));
  read_key(j, "n_id", s.n_id);
  read_key(j, "n_ood", s.n_ood);
  read_key(j, "n_train", s.n_train);
  read_key(j, "classes", s.classes);
  read_key(j, "samples", s.samples);
  read_key(j, "steps", s.steps);
  read_key(j, "id_concentration", s.id_concentration);
  read_key(j, "ood_concentration", s.ood_concentration);
  read_key(j, "dirichlet_base", s.dirichlet_base);
  read_key(j, "intra_sample_noise", s.intra_sample_noise);
  read_key(j, "calibrated", s.calibrated);
  read_key(j, "seed", s.seed);
  read_key(j, "feature_dim", s.feature_dim);
  read_key(j, "feature_separation", s.feature_separation);
  read_key(j, "ood_feature_shift", s.ood_feature_shift);
  return s;
}

Dataset gen_calibrated(const SynthSpec& spec) {
  SynthSpec s = spec;
  s.calibrated = true;
  s.validate();
  return Generator(s, kIdStream).split(Split::id_test, s.n_id, s.id_concentration, nullptr);
}

SynthOutput gen_id_ood(const SynthSpec& spec) {
  spec.validate();
  SynthOutput out;
  std::vector<RecordTruth> id_truth;
  std::vector<RecordTruth> ood_truth;
  out.id = Generator(spec, kIdStream).split(Split::id_test, spec.n_id, spec.id_concentration, &id_truth);
  if (spec.n_ood > 0)
    out.ood = Generator(spec, kOodStream).split(Split::ood_test, spec.n_ood, spec.ood_concentration, &ood_truth);
  if (spec.n_train > 0)
    out.train = Generator(spec, kTrainStream).split(Split::train, spec.n_train, spec.id_concentration, nullptr);

  double conf = 0.0;
  std::size_t correct = 0;
  for (const auto& t : id_truth) {
    conf += t.confidence_sum;
    correct += t.correct;
  }
  const auto positions = static_cast<double>(spec.n_id * spec.steps);
  out.truth.id_mean_confidence = conf / positions;
  out.truth.id_accuracy = static_cast<double>(correct) / positions;

  if (!ood_truth.empty()) {
    std::vector<double> id_h, ood_h, id_m, ood_m;
    for (const auto& t : id_truth) {
      id_h.push_back(t.mean_entropy);
      id_m.push_back(-t.mean_max_prob);
    }
    for (const auto& t : ood_truth) {
      ood_h.push_back(t.mean_entropy);
      ood_m.push_back(-t.mean_max_prob);
    }
    out.truth.auroc_entropy = pair_count_auroc(id_h, ood_h);
    out.truth.auroc_max_prob = pair_count_auroc(id_m, ood_m);
  }
  return out;
}

Dataset gen_multisample(const SynthSpec& spec) {
  if (spec.samples < 2) throw ConfigError("gen_multisample needs samples >= 2");
  spec.validate();
  return Generator(spec, kIdStream).split(Split::id_test, spec.n_id, spec.id_concentration, nullptr);
}

ordered_json manifest_json(const SynthSpec& spec, const SynthTruth& truth) {
  ordered_json m;
  m["spec"] = to_json(spec);
  ordered_json gt;
  gt["calibrated"] = spec.calibrated;
  gt["id_mean_confidence"] = truth.id_mean_confidence;
  gt["id_accuracy"] = truth.id_accuracy;
  if (truth.auroc_entropy) {
    ordered_json auroc;
    auroc["predictive_entropy"] = *truth.auroc_entropy;
    auroc["max_prob"] = *truth.auroc_max_prob;
    gt["auroc"] = auroc;
    gt["auroc_level"] = "sequence";
    gt["aggregation"] = "mean";
  }
  m["ground_truth"] = gt;
  return m;
}

void write_synth(const std::filesystem::path& dir, const SynthSpec& spec, const SynthOutput& out) {
  std::filesystem::create_directories(dir);
  save_dump(dir / "id_test.jsonl", out.id);
  if (!out.ood.records.empty()) save_dump(dir / "ood_test.jsonl", out.ood);
  if (!out.train.records.empty()) save_dump(dir / "train.jsonl", out.train);
  std::ofstream manifest(dir / "manifest.json", std::ios::binary);
  if (!manifest) throw DataError(fmt::format("cannot write '{}'", (dir / "manifest.json").string()));
  manifest << manifest_json(spec, out.truth).dump(2) << '\n';
}

Corpus gen_corpus(const CorpusSpec& spec) {
  if (spec.n == 0 || spec.labels < 1 || spec.vocabulary < 1 || spec.min_length < 1 ||
      spec.max_length < spec.min_length)
    throw ConfigError("invalid corpus spec");
  Rng rng(spec.seed);
  std::vector<double> label_weight(spec.labels);
  for (std::size_t l = 0; l < spec.labels; ++l) label_weight[l] = 1.0 / static_cast<double>(l + 1);
  const std::size_t span = spec.max_length - spec.min_length + 1;

  Corpus corpus;
  corpus.task = spec.task;
  corpus.records.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    CorpusRecord r;
    const auto dominant = static_cast<int>(rng.weighted(label_weight));
    // Lengths lean longer for higher labels so label and length strata interact.
    const auto length = spec.min_length + static_cast<std::size_t>(
        std::min<double>(static_cast<double>(span - 1),
                         static_cast<double>(rng.below(span)) * (0.5 + 0.5 * dominant / static_cast<double>(spec.labels))));
    for (std::size_t t = 0; t < length; ++t) {
      // Roughly Zipfian types: log-uniform rank.
      const double u = rng.uniform();
      const auto rank = static_cast<std::size_t>(std::pow(static_cast<double>(spec.vocabulary), u)) - 1;
      r.tokens.push_back(fmt::format("w{}", std::min(rank, spec.vocabulary - 1)));
      if (spec.task == CorpusTask::token_cls)
        r.labels.push_back(rng.uniform() < 0.5 ? dominant : static_cast<int>(rng.weighted(label_weight)));
    }
    if (spec.task == CorpusTask::sequence_cls) r.labels = {dominant};
    corpus.records.push_back(std::move(r));
  }
  return corpus;
}

}  // namespace ueval
