#include "ueval/discrimination.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <numeric>
#include <fmt/format.h>

#include "ueval/error.hpp"
#include "ueval/parallel.hpp"

namespace ueval {

namespace {

struct Labeled {
  double score;
  bool positive;
};

std::vector<Labeled> merge_labeled(std::span<const double> id_scores, std::span<const double> ood_scores) {
  if (id_scores.empty() || ood_scores.empty())
    throw DataError("AUROC/AUPR need at least one ID and one OOD score");
  std::vector<Labeled> all;
  all.reserve(id_scores.size() + ood_scores.size());
  for (double s : id_scores) all.push_back({s, false});
  for (double s : ood_scores) all.push_back({s, true});
  for (const auto& x : all)
    if (!std::isfinite(x.score)) throw DataError("AUROC/AUPR scores must be finite");
  return all;
}

std::int64_t pairs(std::int64_t n) { return n * (n - 1) / 2; }

// Sorts `v` by value and returns the number of strict inversions removed.
std::int64_t merge_count(std::vector<double>& v, std::vector<double>& tmp, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = merge_count(v, tmp, lo, mid) + merge_count(v, tmp, mid, hi);
  std::size_t i = lo;
  std::size_t j = mid;
  std::size_t k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      tmp[k++] = v[j++];
    } else {
      tmp[k++] = v[i++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + static_cast<std::ptrdiff_t>(lo), tmp.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  auto all = merge_labeled(id_scores, ood_scores);
  std::sort(all.begin(), all.end(), [](const Labeled& a, const Labeled& b) { return a.score < b.score; });
  // U = sum over positives of (#negatives below + half the tied negatives).
  double u = 0.0;
  double negatives_below = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    double neg = 0.0;
    double pos = 0.0;
    while (j < all.size() && all[j].score == all[i].score) {
      (all[j].positive ? pos : neg) += 1.0;
      ++j;
    }
    u += pos * (negatives_below + 0.5 * neg);
    negatives_below += neg;
    i = j;
  }
  return u / (static_cast<double>(id_scores.size()) * static_cast<double>(ood_scores.size()));
}

double aupr(std::span<const double> id_scores, std::span<const double> ood_scores) {
  auto all = merge_labeled(id_scores, ood_scores);
  std::sort(all.begin(), all.end(), [](const Labeled& a, const Labeled& b) { return a.score > b.score; });
  const auto n_pos = static_cast<double>(ood_scores.size());
  double tp = 0.0;
  double fp = 0.0;
  double recall_prev = 0.0;
  double ap = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) {
      (all[j].positive ? tp : fp) += 1.0;
      ++j;
    }
    const double recall = tp / n_pos;
    ap += (recall - recall_prev) * (tp / (tp + fp));
    recall_prev = recall;
    i = j;
  }
  return ap;
}

double kendall_tau(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size())
    throw DataError(fmt::format("Kendall tau needs equal lengths, got {} and {}", xs.size(), ys.size()));
  const std::size_t n = xs.size();
  if (n < 2) throw DataError("Kendall tau needs at least two pairs");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) throw DataError("Kendall tau inputs must be finite");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return xs[a] < xs[b] || (xs[a] == xs[b] && ys[a] < ys[b]);
  });

  std::int64_t tied_x = 0;
  std::int64_t tied_xy = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && xs[order[j]] == xs[order[i]]) ++j;
    tied_x += pairs(static_cast<std::int64_t>(j - i));
    for (std::size_t a = i; a < j;) {
      std::size_t b = a;
      while (b < j && ys[order[b]] == ys[order[a]]) ++b;
      tied_xy += pairs(static_cast<std::int64_t>(b - a));
      a = b;
    }
    i = j;
  }

  std::vector<double> y_sorted(n);
  for (std::size_t i = 0; i < n; ++i) y_sorted[i] = ys[order[i]];
  std::vector<double> tmp(n);
  const std::int64_t discordant = merge_count(y_sorted, tmp, 0, n);

  std::int64_t tied_y = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && y_sorted[j] == y_sorted[i]) ++j;
    tied_y += pairs(static_cast<std::int64_t>(j - i));
    i = j;
  }

  const std::int64_t total = pairs(static_cast<std::int64_t>(n));
  const std::int64_t untied_x = total - tied_x;
  const std::int64_t untied_y = total - tied_y;
  if (untied_x == 0 || untied_y == 0) throw DataError("Kendall tau-b is undefined: a variable is constant");
  // C - D = (C + D) - 2D with C + D = total - tied_x - tied_y + tied_xy.
  const std::int64_t s = total - tied_x - tied_y + tied_xy - 2 * discordant;
  return static_cast<double>(s) /
         std::sqrt(static_cast<double>(untied_x) * static_cast<double>(untied_y));
}

std::vector<std::vector<double>> token_losses(const Dataset& dataset) {
  std::vector<std::vector<double>> out(dataset.records.size());
  std::vector<std::exception_ptr> errors(out.size());
  parallel::for_each_index(out.size(), [&](std::size_t i) {
    try {
      const auto& r = dataset.records[i];
      if (!r.labeled) throw DataError(fmt::format("record '{}' has no gold labels", r.id));
      for (std::size_t t = 0; t < r.steps; ++t)
        if (r.mask[t]) out[i].push_back(token_nll(step_distribution(r, t), r.gold[t]));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

double loss_correlation(const Dataset& dataset, const MetricSeries& series, TauLevel level,
                        TokenTauMode mode) {
  if (series.token_scores.size() != dataset.records.size())
    throw DataError("metric series does not belong to this dataset");
  const auto losses = token_losses(dataset);

  if (level == TauLevel::sequence) {
    std::vector<double> unc;
    std::vector<double> loss;
    for (std::size_t i = 0; i < losses.size(); ++i) {
      if (losses[i].empty()) continue;
      unc.push_back(series.oriented(series.sequence_scores[i]));
      loss.push_back(std::accumulate(losses[i].begin(), losses[i].end(), 0.0) /
                     static_cast<double>(losses[i].size()));
    }
    return kendall_tau(unc, loss);
  }

  if (mode == TokenTauMode::pooled) {
    std::vector<double> loss;
    for (const auto& row : losses) loss.insert(loss.end(), row.begin(), row.end());
    return kendall_tau(series.oriented_token_scores(), loss);
  }

  double sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (losses[i].size() < 2) continue;
    std::vector<double> unc;
    for (double x : series.token_scores[i]) unc.push_back(series.oriented(x));
    try {
      sum += kendall_tau(unc, losses[i]);
      ++defined;
    } catch (const DataError&) {
      // constant scores or losses within this record: tau undefined, skipped
    }
  }
  if (defined == 0) throw DataError("per-sequence token tau is undefined for every record");
  return sum / static_cast<double>(defined);
}

}  // namespace ueval
