#include "ueval/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <fmt/format.h>

#include "ueval/error.hpp"
#include "ueval/parallel.hpp"

namespace ueval {

namespace {

void check_table(std::span<const Distribution> probs, std::span<const int> gold) {
  if (probs.empty()) throw DataError("calibration error of an empty prediction set");
  if (probs.size() != gold.size())
    throw DataError(fmt::format("{} predictions but {} gold labels", probs.size(), gold.size()));
  const std::size_t k = probs.front().size();
  for (const auto& d : probs)
    if (d.size() != k) throw DataError("predictions disagree on the class count");
}

}  // namespace

std::size_t confidence_bin(double confidence, std::size_t bins) {
  const double scaled = std::ceil(confidence * static_cast<double>(bins));
  if (scaled <= 1.0) return 0;
  return std::min(static_cast<std::size_t>(scaled) - 1, bins - 1);
}

std::vector<BinStat> ece_bins(std::span<const ConfidencePoint> points, std::size_t bins) {
  if (bins == 0) throw ConfigError("need at least one bin");
  std::vector<BinStat> out(bins);
  std::vector<double> conf_sum(bins, 0.0);
  std::vector<double> correct_sum(bins, 0.0);
  for (const auto& p : points) {
    if (!(p.confidence >= 0.0 && p.confidence <= 1.0))
      throw DataError(fmt::format("confidence {} outside [0, 1]", p.confidence));
    const auto m = confidence_bin(p.confidence, bins);
    ++out[m].count;
    conf_sum[m] += p.confidence;
    correct_sum[m] += p.correct ? 1.0 : 0.0;
  }
  for (std::size_t m = 0; m < bins; ++m) {
    out[m].lo = static_cast<double>(m) / static_cast<double>(bins);
    out[m].hi = static_cast<double>(m + 1) / static_cast<double>(bins);
    if (out[m].count == 0) continue;
    const auto n = static_cast<double>(out[m].count);
    out[m].mean_confidence = conf_sum[m] / n;
    out[m].accuracy = correct_sum[m] / n;
  }
  return out;
}

double ece(std::span<const ConfidencePoint> points, std::size_t bins) {
  if (points.empty()) throw DataError("ECE of an empty prediction set");
  const auto stats = ece_bins(points, bins);
  const auto n = static_cast<double>(points.size());
  double total = 0.0;
  for (const auto& b : stats)
    if (b.count > 0)
      total += static_cast<double>(b.count) / n * std::abs(b.accuracy - b.mean_confidence);
  return total;
}

double sce(std::span<const Distribution> probs, std::span<const int> gold, std::size_t bins) {
  check_table(probs, gold);
  if (bins == 0) throw ConfigError("need at least one bin");
  const std::size_t classes = probs.front().size();
  const auto n = static_cast<double>(probs.size());
  double total = 0.0;
  for (std::size_t k = 0; k < classes; ++k) {
    std::vector<ConfidencePoint> points;
    points.reserve(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i)
      points.push_back({probs[i].probs[k], gold[i] == static_cast<int>(k)});
    for (const auto& b : ece_bins(points, bins))
      if (b.count > 0)
        total += static_cast<double>(b.count) / n * std::abs(b.accuracy - b.mean_confidence);
  }
  return total / static_cast<double>(classes);
}

std::vector<std::vector<BinStat>> ace_ranges(std::span<const Distribution> probs,
                                             std::span<const int> gold, std::size_t ranges,
                                             double threshold) {
  check_table(probs, gold);
  if (ranges == 0) throw ConfigError("need at least one range");
  if (probs.size() < ranges)
    throw DataError(fmt::format("ACE needs at least {} predictions, got {}", ranges, probs.size()));
  const std::size_t classes = probs.front().size();
  std::vector<std::vector<BinStat>> out(classes);
  std::vector<std::pair<double, bool>> column;
  for (std::size_t k = 0; k < classes; ++k) {
    column.clear();
    for (std::size_t i = 0; i < probs.size(); ++i)
      if (probs[i].probs[k] >= threshold)
        column.emplace_back(probs[i].probs[k], gold[i] == static_cast<int>(k));
    if (column.size() < ranges)
      throw DataError(fmt::format("ACE: class {} keeps {} predictions above threshold {}, fewer than {} ranges",
                                  k, column.size(), threshold, ranges));
    std::stable_sort(column.begin(), column.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    const std::size_t base = column.size() / ranges;
    const std::size_t extra = column.size() % ranges;
    std::size_t begin = 0;
    for (std::size_t r = 0; r < ranges; ++r) {
      const std::size_t len = base + (r < extra ? 1 : 0);
      BinStat b;
      b.count = len;
      b.lo = column[begin].first;
      b.hi = column[begin + len - 1].first;
      double conf = 0.0;
      double acc = 0.0;
      for (std::size_t i = begin; i < begin + len; ++i) {
        conf += column[i].first;
        acc += column[i].second ? 1.0 : 0.0;
      }
      b.mean_confidence = conf / static_cast<double>(len);
      b.accuracy = acc / static_cast<double>(len);
      out[k].push_back(b);
      begin += len;
    }
  }
  return out;
}

double ace(std::span<const Distribution> probs, std::span<const int> gold, std::size_t ranges,
           double threshold) {
  const auto per_class = ace_ranges(probs, gold, ranges, threshold);
  double total = 0.0;
  for (const auto& cls : per_class)
    for (const auto& b : cls) total += std::abs(b.accuracy - b.mean_confidence);
  return total / static_cast<double>(per_class.size() * ranges);
}

PredictionSet prediction_set(const Distribution& dist, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError(fmt::format("alpha {} outside (0, 1)", alpha));
  std::vector<std::size_t> order(dist.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist.probs[a] > dist.probs[b]; });
  // Tolerance keeps exact decimal targets (19 x 0.05) from missing 0.95 by one ulp.
  const double target = 1.0 - alpha - 1e-12;
  PredictionSet set;
  for (std::size_t k : order) {
    set.classes.push_back(k);
    set.mass += dist.probs[k];
    if (set.mass >= target) break;
  }
  return set;
}

CoverageStats coverage_stats(std::span<const Distribution> probs, std::span<const int> gold,
                             double alpha) {
  check_table(probs, gold);
  CoverageStats out;
  out.n = probs.size();
  std::size_t covered = 0;
  std::size_t width = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const auto set = prediction_set(probs[i], alpha);
    width += set.width();
    if (std::find(set.classes.begin(), set.classes.end(), static_cast<std::size_t>(gold[i])) !=
        set.classes.end())
      ++covered;
  }
  out.coverage = static_cast<double>(covered) / static_cast<double>(out.n);
  out.mean_width = static_cast<double>(width) / static_cast<double>(out.n);
  return out;
}

CoverageStats coverage_stats(const Dataset& dataset, double alpha) {
  const auto pooled = pool_predictions(dataset);
  if (pooled.dists.empty()) throw DataError("coverage of a dataset without labeled positions");
  return coverage_stats(pooled.dists, pooled.gold, alpha);
}

std::vector<ConfidencePoint> PooledPredictions::confidence_points() const {
  std::vector<ConfidencePoint> out;
  out.reserve(dists.size());
  for (std::size_t i = 0; i < dists.size(); ++i) {
    const auto top = argmax(dists[i]);
    out.push_back({dists[i].probs[top], static_cast<int>(top) == gold[i]});
  }
  return out;
}

namespace {

void pool_record(const PredictionRecord& r, PooledPredictions& out) {
  if (!r.labeled) return;
  for (std::size_t t = 0; t < r.steps; ++t) {
    if (!r.mask[t]) continue;
    out.dists.push_back(step_distribution(r, t));
    out.gold.push_back(r.gold[t]);
  }
}

}  // namespace

PooledPredictions pool_predictions(const Dataset& dataset) {
  std::vector<PooledPredictions> parts(dataset.records.size());
  parallel::for_each_index(parts.size(),
                           [&](std::size_t i) { pool_record(dataset.records[i], parts[i]); });
  PooledPredictions out;
  for (auto& p : parts) {
    std::move(p.dists.begin(), p.dists.end(), std::back_inserter(out.dists));
    out.gold.insert(out.gold.end(), p.gold.begin(), p.gold.end());
  }
  return out;
}

PooledPredictions serial::pool_predictions(const Dataset& dataset) {
  PooledPredictions out;
  for (const auto& r : dataset.records) pool_record(r, out);
  return out;
}

CalibrationReport calibration_report(const PooledPredictions& pooled, const CalibrationOptions& opt) {
  if (pooled.dists.empty()) throw DataError("calibration needs labeled, unmasked positions");
  CalibrationReport rep;
  const auto points = pooled.confidence_points();
  rep.n_points = points.size();
  rep.ece_bins = ece_bins(points, opt.bins);
  rep.ece = ece(points, opt.bins);
  rep.sce = sce(pooled.dists, pooled.gold, opt.bins);
  rep.ace_bins = ace_ranges(pooled.dists, pooled.gold, opt.ranges, opt.ace_threshold);
  rep.ace = ace(pooled.dists, pooled.gold, opt.ranges, opt.ace_threshold);
  const auto cov = coverage_stats(pooled.dists, pooled.gold, opt.alpha);
  rep.coverage_pct = cov.coverage;
  rep.mean_width = cov.mean_width;
  return rep;
}

}  // namespace ueval
