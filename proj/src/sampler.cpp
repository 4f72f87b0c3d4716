#include "ueval/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>
#include <fmt/format.h>

#include "ueval/error.hpp"
#include "ueval/random.hpp"

namespace ueval {

namespace {

constexpr double kAlignmentSmoothing = 1e-10;

void check_plan(const Corpus& corpus, const SamplePlan& plan, CorpusTask expected) {
  if (corpus.records.empty()) throw DataError("cannot sub-sample an empty corpus");
  if (corpus.task != expected)
    throw ConfigError(fmt::format("sampler for {} called on a {} corpus", to_string(expected),
                                  to_string(corpus.task)));
  if (plan.target_size == 0 || plan.target_size > corpus.records.size())
    throw ConfigError(fmt::format("target size {} outside [1, {}]", plan.target_size,
                                  corpus.records.size()));
}

// Remaining members of one bucket plus the bucket's fixed sampling weight.
struct Pool {
  double weight = 0.0;
  std::vector<std::size_t> members;
};

std::size_t take_uniform(Rng& rng, std::vector<std::size_t>& members) {
  const auto pick = static_cast<std::size_t>(rng.below(members.size()));
  const std::size_t idx = members[pick];
  members[pick] = members.back();
  members.pop_back();
  return idx;
}

template <typename Key, typename Value>
std::size_t draw_key(Rng& rng, const std::vector<std::pair<Key, Value>>& active,
                     auto&& weight_of) {
  std::vector<double> w;
  w.reserve(active.size());
  for (const auto& kv : active) w.push_back(weight_of(kv.second));
  return rng.weighted(w);
}

std::vector<CorpusRecord> gather(const Corpus& corpus, const std::vector<std::size_t>& idx) {
  std::vector<CorpusRecord> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(corpus.records[i]);
  return out;
}

Distribution normalized(const std::vector<double>& counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  Distribution d{counts};
  if (total > 0.0)
    for (double& p : d.probs) p /= total;
  return d;
}

}  // namespace

std::string_view to_string(CorpusTask task) {
  return task == CorpusTask::sequence_cls ? "sequence_cls" : "token_cls";
}

CorpusTask parse_corpus_task(std::string_view name) {
  if (name == "sequence_cls" || name == "sequence") return CorpusTask::sequence_cls;
  if (name == "token_cls" || name == "token") return CorpusTask::token_cls;
  throw ConfigError(fmt::format("unknown corpus task '{}' (expected sequence_cls or token_cls)", name));
}

std::size_t Corpus::label_count() const {
  int top = -1;
  for (const auto& r : records)
    for (int l : r.labels) top = std::max(top, l);
  return static_cast<std::size_t>(top + 1);
}

std::vector<std::size_t> select_sequence_cls(const Corpus& corpus, const SamplePlan& plan) {
  check_plan(corpus, plan, CorpusTask::sequence_cls);
  // label -> length -> pool; std::map keeps iteration order deterministic.
  std::map<int, std::map<std::size_t, Pool>> tree;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    const auto& r = corpus.records[i];
    auto& pool = tree[r.labels.front()][r.length()];
    pool.weight += 1.0;
    pool.members.push_back(i);
  }
  std::vector<std::pair<int, std::vector<std::pair<std::size_t, Pool>>>> labels;
  for (auto& [label, lengths] : tree) {
    std::vector<std::pair<std::size_t, Pool>> pools(lengths.begin(), lengths.end());
    labels.emplace_back(label, std::move(pools));
  }
  std::vector<double> label_weight;
  for (const auto& [label, pools] : labels) {
    double w = 0.0;
    for (const auto& p : pools) w += p.second.weight;
    label_weight.push_back(w);
  }

  Rng rng(plan.seed);
  std::vector<std::size_t> out;
  out.reserve(plan.target_size);
  while (out.size() < plan.target_size) {
    const std::size_t li = rng.weighted(label_weight);
    auto& pools = labels[li].second;
    const std::size_t pi = draw_key(rng, pools, [](const Pool& p) { return p.weight; });
    auto& pool = pools[pi].second;
    out.push_back(take_uniform(rng, pool.members));
    if (pool.members.empty()) {
      pools.erase(pools.begin() + static_cast<std::ptrdiff_t>(pi));
      if (pools.empty()) {
        labels.erase(labels.begin() + static_cast<std::ptrdiff_t>(li));
        label_weight.erase(label_weight.begin() + static_cast<std::ptrdiff_t>(li));
      }
    }
  }
  return out;
}

std::vector<CorpusRecord> subsample_sequence_cls(const Corpus& corpus, const SamplePlan& plan) {
  return gather(corpus, select_sequence_cls(corpus, plan));
}

double alignment_score(std::span<const int> sequence_labels, const Distribution& corpus_labels) {
  if (sequence_labels.empty()) throw DataError("alignment score of an empty label sequence");
  const std::size_t k = corpus_labels.size();
  std::vector<double> counts(k, 0.0);
  for (int l : sequence_labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= k)
      throw DataError(fmt::format("label {} outside the corpus label set [0, {})", l, k));
    counts[static_cast<std::size_t>(l)] += 1.0;
  }
  const auto n = static_cast<double>(sequence_labels.size());
  const double denom = 1.0 + static_cast<double>(k) * kAlignmentSmoothing;
  double score = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    if (corpus_labels.probs[c] <= 0.0) continue;
    const double p_seq = (counts[c] / n + kAlignmentSmoothing) / denom;
    score += corpus_labels.probs[c] * std::log(p_seq);
  }
  return score;
}

std::vector<double> bucket_weights(std::span<const double> scores) {
  if (scores.empty()) return {};
  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  std::vector<double> w(scores.size(), 1.0);
  if (hi > lo)
    for (std::size_t i = 0; i < scores.size(); ++i) w[i] = (scores[i] - lo) / (hi - lo);
  double total = 0.0;
  for (double x : w) total += x;
  for (double& x : w) x /= total;
  return w;
}

std::vector<std::size_t> select_token_cls(const Corpus& corpus, const SamplePlan& plan) {
  check_plan(corpus, plan, CorpusTask::token_cls);
  const auto corpus_dist = label_distribution(corpus.records, corpus.label_count());
  std::vector<double> score(corpus.records.size());
  std::map<std::size_t, Pool> by_length;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    score[i] = alignment_score(corpus.records[i].labels, corpus_dist);
    auto& pool = by_length[corpus.records[i].length()];
    pool.weight += 1.0;
    pool.members.push_back(i);
  }
  std::vector<std::pair<std::size_t, Pool>> pools(by_length.begin(), by_length.end());

  Rng rng(plan.seed);
  std::vector<std::size_t> out;
  out.reserve(plan.target_size);
  std::vector<double> bucket;
  while (out.size() < plan.target_size) {
    const std::size_t pi = draw_key(rng, pools, [](const Pool& p) { return p.weight; });
    auto& members = pools[pi].second.members;
    bucket.clear();
    for (auto m : members) bucket.push_back(score[m]);
    const std::size_t pick = rng.weighted(bucket_weights(bucket));
    out.push_back(members[pick]);
    // Order-preserving erase keeps the draw independent of earlier swap patterns.
    members.erase(members.begin() + static_cast<std::ptrdiff_t>(pick));
    if (members.empty()) pools.erase(pools.begin() + static_cast<std::ptrdiff_t>(pi));
  }
  return out;
}

std::vector<CorpusRecord> subsample_token_cls(const Corpus& corpus, const SamplePlan& plan) {
  return gather(corpus, select_token_cls(corpus, plan));
}

std::vector<std::size_t> select(const Corpus& corpus, const SamplePlan& plan) {
  return plan.task == CorpusTask::sequence_cls ? select_sequence_cls(corpus, plan)
                                               : select_token_cls(corpus, plan);
}

Distribution label_distribution(std::span<const CorpusRecord> records, std::size_t classes) {
  std::vector<double> counts(classes, 0.0);
  for (const auto& r : records)
    for (int l : r.labels) {
      if (l < 0 || static_cast<std::size_t>(l) >= classes)
        throw DataError(fmt::format("label {} outside [0, {})", l, classes));
      counts[static_cast<std::size_t>(l)] += 1.0;
    }
  return normalized(counts);
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DataError("JS divergence needs distributions of equal length");
  double js = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) js += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) js += 0.5 * q[i] * std::log(q[i] / m);
  }
  return std::clamp(js, 0.0, std::log(2.0));
}

namespace {

template <typename Key>
FrequencyTable table_from(const std::map<Key, std::pair<double, double>>& counts, double na, double nb) {
  FrequencyTable t;
  for (const auto& [key, c] : counts) {
    if constexpr (std::is_same_v<Key, std::string>)
      t.keys.push_back(key);
    else
      t.keys.push_back(std::to_string(key));
    t.freq_a.push_back(c.first / na);
    t.freq_b.push_back(c.second / nb);
  }
  return t;
}

}  // namespace

DistributionComparison compare_distributions(std::span<const CorpusRecord> a,
                                             std::span<const CorpusRecord> b, std::size_t top_k) {
  if (a.empty() || b.empty()) throw DataError("distribution comparison needs two non-empty corpora");
  DistributionComparison cmp;
  cmp.top_k = top_k;

  std::map<std::size_t, std::pair<double, double>> lengths;
  for (const auto& r : a) lengths[r.length()].first += 1.0;
  for (const auto& r : b) lengths[r.length()].second += 1.0;
  cmp.lengths = table_from(lengths, static_cast<double>(a.size()), static_cast<double>(b.size()));
  cmp.length_js = js_divergence(cmp.lengths.freq_a, cmp.lengths.freq_b);

  std::map<int, std::pair<double, double>> labels;
  double la = 0.0;
  double lb = 0.0;
  for (const auto& r : a)
    for (int l : r.labels) labels[l].first += 1.0, la += 1.0;
  for (const auto& r : b)
    for (int l : r.labels) labels[l].second += 1.0, lb += 1.0;
  if (la > 0.0 && lb > 0.0) {
    cmp.labels = table_from(labels, la, lb);
    cmp.label_js = js_divergence(cmp.labels.freq_a, cmp.labels.freq_b);
  }

  std::unordered_map<std::string, double> type_a;
  std::unordered_map<std::string, double> type_b;
  double ta = 0.0;
  double tb = 0.0;
  for (const auto& r : a)
    for (const auto& tok : r.tokens) type_a[tok] += 1.0, ta += 1.0;
  for (const auto& r : b)
    for (const auto& tok : r.tokens) type_b[tok] += 1.0, tb += 1.0;
  std::vector<std::pair<std::string, double>> ranked(type_a.begin(), type_a.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
    return x.second > y.second || (x.second == y.second && x.first < y.first);
  });
  if (ranked.size() > top_k) ranked.resize(top_k);
  double covered_a = 0.0;
  double covered_b = 0.0;
  for (const auto& [tok, count] : ranked) {
    const double fb = type_b.count(tok) ? type_b.at(tok) : 0.0;
    cmp.types.keys.push_back(tok);
    cmp.types.freq_a.push_back(ta > 0.0 ? count / ta : 0.0);
    cmp.types.freq_b.push_back(tb > 0.0 ? fb / tb : 0.0);
    covered_a += count;
    covered_b += fb;
  }
  cmp.types.keys.push_back("<other>");
  cmp.types.freq_a.push_back(ta > 0.0 ? (ta - covered_a) / ta : 0.0);
  cmp.types.freq_b.push_back(tb > 0.0 ? (tb - covered_b) / tb : 0.0);
  cmp.top_type_js = js_divergence(cmp.types.freq_a, cmp.types.freq_b);
  return cmp;
}

}  // namespace ueval
