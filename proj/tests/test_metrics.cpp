#include <gtest/gtest.h>

#include <cmath>

#include "generators.hpp"
#include "oracles.hpp"
#include "ueval/error.hpp"
#include "ueval/metrics.hpp"
#include "ueval/parallel.hpp"

using namespace ueval;

namespace {

Distribution D(std::vector<double> p) { return Distribution{std::move(p)}; }

PredictionRecord logit_record(std::vector<double> values, std::size_t s, std::size_t t, std::size_t k) {
  PredictionRecord r;
  r.id = "r";
  r.samples = s;
  r.steps = t;
  r.classes = k;
  r.values = std::move(values);
  r.gold.assign(t, 0);
  finalize_record(r);
  return r;
}

Dataset single(PredictionRecord r) {
  Dataset ds;
  ds.records.push_back(std::move(r));
  finalize_dataset(ds);
  return ds;
}

}  // namespace

TEST(MetricId, PolarityAndArity) {
  EXPECT_EQ(metric_id(MetricName::max_prob).polarity, Polarity::confidence);
  EXPECT_EQ(metric_id(MetricName::softmax_gap).polarity, Polarity::confidence);
  EXPECT_EQ(metric_id(MetricName::log_density).polarity, Polarity::confidence);
  EXPECT_EQ(metric_id(MetricName::predictive_entropy).polarity, Polarity::uncertainty);
  EXPECT_EQ(metric_id(MetricName::dempster_shafer).polarity, Polarity::uncertainty);
  EXPECT_EQ(metric_id(MetricName::class_variance).arity, Arity::multi);
  EXPECT_EQ(metric_id(MetricName::mutual_information).arity, Arity::multi);
  EXPECT_EQ(metric_id(MetricName::log_density).arity, Arity::feature);
  for (auto name : all_metric_names()) EXPECT_EQ(parse_metric(to_string(name)).name, name);
  EXPECT_THROW(parse_metric("bogus"), ConfigError);
}

TEST(MaxProb, Examples) {
  EXPECT_EQ(max_prob(D({0, 1, 0})), 1.0);
  EXPECT_NEAR(max_prob(D({0.2, 0.2, 0.2, 0.2, 0.2})), 0.2, 1e-15);
  EXPECT_EQ(max_prob(D({0.5, 0.3, 0.2})), 0.5);
}

TEST(SoftmaxGap, Examples) {
  EXPECT_EQ(softmax_gap(D({0.25, 0.25, 0.25, 0.25})), 0.0);
  EXPECT_EQ(softmax_gap(D({1, 0})), 1.0);
  EXPECT_NEAR(softmax_gap(D({0.5, 0.3, 0.2})), 0.2, 1e-15);
}

TEST(PredictiveEntropy, Examples) {
  EXPECT_EQ(predictive_entropy(D({0, 1, 0})), 0.0);
  EXPECT_NEAR(predictive_entropy(D({0.25, 0.25, 0.25, 0.25})), std::log(4.0), 1e-15);
  EXPECT_NEAR(predictive_entropy(D({0.5, 0.5, 0, 0})), std::log(2.0), 1e-15);
}

TEST(PredictiveEntropy, BoundsProperty) {
  Rng rng(1);
  for (int i = 0; i < 5000; ++i) {
    const std::size_t k = 2 + rng.below(49);
    const auto d = gen::distribution(rng, k);
    const double h = predictive_entropy(d);
    EXPECT_NEAR(h, oracle::entropy(d.probs), 1e-10);  // the 1e-12 probability floor shifts tiny terms
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log(static_cast<double>(k)) + 1e-12);
  }
}

TEST(DempsterShafer, Examples) {
  EXPECT_NEAR(dempster_shafer(std::vector<double>{0, 0}), 0.5, 1e-15);
  EXPECT_NEAR(dempster_shafer(std::vector<double>{std::log(2.0), std::log(2.0)}), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(dempster_shafer(std::vector<double>{0, 0, 0}), 0.5, 1e-15);
}

TEST(DempsterShafer, NoOverflowOnLargeLogits) {
  const double ds = dempster_shafer(std::vector<double>{700.0, 699.0});
  EXPECT_TRUE(std::isfinite(ds));
  EXPECT_NEAR(ds / (2.0 * std::exp(-700.0) / (1.0 + std::exp(-1.0))), 1.0, 1e-12);
  EXPECT_EQ(dempster_shafer(std::vector<double>{1000.0, 999.0}), 0.0);
  EXPECT_NEAR(dempster_shafer(std::vector<double>{-1000.0, -1000.0}), 1.0, 1e-12);
}

TEST(DempsterShafer, DecreasingInEachLogitAndUnderShift) {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 2 + rng.below(10);
    auto z = gen::logits(rng, k, 3.0);
    const double base = dempster_shafer(z);
    EXPECT_GT(base, 0.0);
    EXPECT_LT(base, 1.0);
    auto bumped = z;
    bumped[rng.below(k)] += 0.5;
    EXPECT_LT(dempster_shafer(bumped), base);
    auto shifted = z;
    for (double& x : shifted) x += 0.5;
    EXPECT_LT(dempster_shafer(shifted), base);
    // softmax-based metrics do not move under the same shift
    EXPECT_NEAR(max_prob(softmax(shifted)), max_prob(softmax(z)), 1e-12);
    EXPECT_NEAR(softmax_gap(softmax(shifted)), softmax_gap(softmax(z)), 1e-12);
  }
}

TEST(ClassVariance, Examples) {
  const auto same = class_variance(SampleSet{{D({0.3, 0.7}), D({0.3, 0.7})}});
  EXPECT_EQ(same.value, 0.0);
  EXPECT_FALSE(same.single_sample);
  EXPECT_NEAR(class_variance(SampleSet{{D({1, 0}), D({0, 1})}}).value, 0.25, 1e-15);
  EXPECT_NEAR(class_variance(SampleSet{{D({0.8, 0.2}), D({0.6, 0.4})}}).value, 0.01, 1e-15);
}

TEST(ClassVariance, SingleSampleFlagged) {
  const auto v = class_variance(SampleSet{{D({0.3, 0.7})}});
  EXPECT_EQ(v.value, 0.0);
  EXPECT_TRUE(v.single_sample);
}

TEST(MutualInformation, Examples) {
  EXPECT_EQ(mutual_information(SampleSet{{D({0.3, 0.7}), D({0.3, 0.7})}}).value, 0.0);
  const auto mi = mutual_information(SampleSet{{D({1, 0}), D({0, 1})}});
  EXPECT_NEAR(mi.value, std::log(2.0), 1e-15);
  EXPECT_NEAR(mi.total_entropy, std::log(2.0), 1e-15);
  EXPECT_EQ(mi.aleatoric, 0.0);
  const double expect = oracle::entropy({0.8, 0.2}) - 0.5 * (oracle::entropy({0.9, 0.1}) + oracle::entropy({0.7, 0.3}));
  EXPECT_NEAR(mutual_information(SampleSet{{D({0.9, 0.1}), D({0.7, 0.3})}}).value, expect, 1e-15);
}

TEST(MutualInformation, SingleSampleIsZero) {
  const auto mi = mutual_information(SampleSet{{D({0.3, 0.7})}});
  EXPECT_EQ(mi.value, 0.0);
  EXPECT_TRUE(mi.single_sample);
}

TEST(MutualInformation, DecompositionProperty) {
  Rng rng(4);
  for (int i = 0; i < 3000; ++i) {
    const auto ss = gen::sample_set(rng, 1 + rng.below(20), 2 + rng.below(49));
    const auto mi = mutual_information(ss);
    EXPECT_GE(mi.value, 0.0);
    EXPECT_NEAR(mi.value + mi.aleatoric, mi.total_entropy, 1e-12);
    double mean_h = 0.0;
    for (const auto& d : ss.dists) mean_h += oracle::entropy(d.probs);
    mean_h /= static_cast<double>(ss.size());
    EXPECT_NEAR(mi.value, oracle::entropy(mean_distribution(ss).probs) - mean_h, 1e-9);
  }
}

TEST(Aggregate, Examples) {
  EXPECT_EQ(aggregate_sequence(std::vector<double>{0.7}, Aggregation::mean), 0.7);
  EXPECT_EQ(aggregate_sequence(std::vector<double>{0, 2}, Aggregation::mean), 1.0);
  EXPECT_EQ(aggregate_sequence(std::vector<double>{0, 2}, Aggregation::max), 2.0);
  EXPECT_THROW(aggregate_sequence(std::vector<double>{}, Aggregation::mean), DataError);
  EXPECT_THROW(parse_aggregation("median"), ConfigError);
}

TEST(ComputeSeries, SingleTokenRecord) {
  const auto ds = single(logit_record({0.0, 1.0}, 1, 1, 2));
  const auto s = compute_series(ds, MetricName::max_prob, Aggregation::mean);
  ASSERT_EQ(s.token_scores.size(), 1u);
  ASSERT_EQ(s.token_scores[0].size(), 1u);
  EXPECT_EQ(s.token_scores[0][0], s.sequence_scores[0]);
  EXPECT_EQ(s.oriented_sequence_scores()[0], -s.sequence_scores[0]);
}

TEST(ComputeSeries, OneHotEntropyZero) {
  const auto ds = single(logit_record({0, -800, -800, 0, -800, -800}, 1, 2, 3));
  const auto s = compute_series(ds, MetricName::predictive_entropy, Aggregation::mean);
  for (double x : s.token_scores[0]) EXPECT_EQ(x, 0.0);
}

TEST(ComputeSeries, MeanOfTokenEntropies) {
  const auto ds = single(logit_record({0, -800, 0, 0}, 1, 2, 2));
  const auto s = compute_series(ds, MetricName::predictive_entropy, Aggregation::mean);
  EXPECT_NEAR(s.sequence_scores[0], std::log(2.0) / 2.0, 1e-12);
  const auto m = compute_series(ds, MetricName::predictive_entropy, Aggregation::max);
  EXPECT_NEAR(m.sequence_scores[0], std::log(2.0), 1e-12);
}

TEST(ComputeSeries, UnavailableInputs) {
  PredictionRecord r;
  r.id = "p";
  r.samples = 1;
  r.steps = 1;
  r.classes = 2;
  r.kind = ScoreKind::probabilities;
  r.values = {0.4, 0.6};
  r.gold = {0};
  finalize_record(r);
  const auto ds = single(r);
  EXPECT_THROW(compute_series(ds, MetricName::dempster_shafer, Aggregation::mean), UnavailableError);
  EXPECT_THROW(compute_series(ds, MetricName::log_density, Aggregation::mean), UnavailableError);
  EXPECT_NO_THROW(compute_series(ds, MetricName::max_prob, Aggregation::mean));
}

TEST(ComputeSeries, SingleSampleMultiMetricFlagged) {
  const auto ds = single(logit_record({0.0, 1.0}, 1, 1, 2));
  const auto s = compute_series(ds, MetricName::mutual_information, Aggregation::mean);
  EXPECT_EQ(s.single_sample_tokens, 1u);
  EXPECT_EQ(s.sequence_scores[0], 0.0);
}

TEST(ComputeSeries, ShiftInvarianceOfArgmaxMetrics) {
  Rng rng(6);
  auto ds = gen::dataset(rng, 20, 1, 4, 5);
  auto shifted = ds;
  for (auto& r : shifted.records)
    for (double& v : r.values) v += 3.25;
  for (auto m : {MetricName::max_prob, MetricName::softmax_gap}) {
    const auto a = compute_series(ds, m, Aggregation::mean);
    const auto b = compute_series(shifted, m, Aggregation::mean);
    for (std::size_t i = 0; i < a.token_scores.size(); ++i)
      for (std::size_t t = 0; t < a.token_scores[i].size(); ++t) EXPECT_NEAR(a.token_scores[i][t], b.token_scores[i][t], 1e-12);
  }
}

TEST(ComputeSeries, ParallelMatchesSerial) {
  Rng rng(8);
  const auto ds = gen::dataset(rng, 300, 3, 12, 6);
  parallel::set_threads(4);
  for (auto m : {MetricName::max_prob, MetricName::softmax_gap, MetricName::predictive_entropy,
                 MetricName::dempster_shafer, MetricName::class_variance, MetricName::mutual_information}) {
    for (auto agg : {Aggregation::mean, Aggregation::max}) {
      const auto a = compute_series(ds, m, agg);
      const auto b = serial::compute_series(ds, m, agg);
      ASSERT_EQ(a.token_scores.size(), b.token_scores.size());
      for (std::size_t i = 0; i < a.token_scores.size(); ++i) {
        ASSERT_EQ(a.token_scores[i].size(), b.token_scores[i].size());
        for (std::size_t t = 0; t < a.token_scores[i].size(); ++t)
          EXPECT_NEAR(a.token_scores[i][t], b.token_scores[i][t], 1e-12);
        if (!std::isnan(b.sequence_scores[i])) EXPECT_NEAR(a.sequence_scores[i], b.sequence_scores[i], 1e-12);
      }
      EXPECT_EQ(a.single_sample_tokens, b.single_sample_tokens);
    }
  }
}

TEST(ComputeSeries, ThreadCountDoesNotChangeResults) {
  Rng rng(9);
  const auto ds = gen::dataset(rng, 200, 2, 10, 4);
  parallel::set_threads(1);
  const auto a = compute_series(ds, MetricName::mutual_information, Aggregation::mean);
  parallel::set_threads(4);
  const auto b = compute_series(ds, MetricName::mutual_information, Aggregation::mean);
  EXPECT_EQ(a.token_scores, b.token_scores);
}
