#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ueval/core.hpp"

namespace ueval {

struct ConfidencePoint {
  double confidence = 0.0;
  bool correct = false;
};

/// Summary of one calibration bin. mean_confidence and accuracy are 0 for empty bins.
struct BinStat {
  std::size_t count = 0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Equal-width bin of a confidence in [0, 1]: bin m covers ((m-1)/M, m/M], and 0 goes to
/// the first bin. Returns a 0-based index.
std::size_t confidence_bin(double confidence, std::size_t bins);

/// Equal-width reliability bins over [0, 1]. lo/hi are the bin edges.
std::vector<BinStat> ece_bins(std::span<const ConfidencePoint> points, std::size_t bins = 10);

/// Expected calibration error: sum_m |B_m|/N * |acc(B_m) - conf(B_m)|.
double ece(std::span<const ConfidencePoint> points, std::size_t bins = 10);

/// Static calibration error: class-wise equal-width binning of probs[.][k] against
/// the indicator gold == k, averaged over classes.
double sce(std::span<const Distribution> probs, std::span<const int> gold, std::size_t bins = 10);

/// Adaptive calibration error: per class, probabilities >= threshold are sorted and cut into
/// `ranges` equal-count ranges (the first N mod R ranges take one extra point).
/// Throws DataError when fewer than `ranges` points survive for some class.
double ace(std::span<const Distribution> probs, std::span<const int> gold, std::size_t ranges = 10,
           double threshold = 0.0);

/// Per-class range statistics behind ace(); outer index is the class.
std::vector<std::vector<BinStat>> ace_ranges(std::span<const Distribution> probs,
                                             std::span<const int> gold, std::size_t ranges = 10,
                                             double threshold = 0.0);

/// Smallest set of most probable classes whose mass reaches 1 - alpha.
struct PredictionSet {
  std::vector<std::size_t> classes;  // descending probability, ties by lower index
  double mass = 0.0;

  std::size_t width() const { return classes.size(); }
};

PredictionSet prediction_set(const Distribution& dist, double alpha = 0.05);

struct CoverageStats {
  double coverage = 0.0;    // fraction of positions whose gold class is in the set
  double mean_width = 0.0;  // mean set cardinality
  std::size_t n = 0;
};

CoverageStats coverage_stats(std::span<const Distribution> probs, std::span<const int> gold,
                             double alpha = 0.05);
CoverageStats coverage_stats(const Dataset& dataset, double alpha = 0.05);

/// Mean distributions and gold labels of all unmasked positions of labeled records,
/// in canonical order. Parallel over records.
struct PooledPredictions {
  std::vector<Distribution> dists;
  std::vector<int> gold;

  std::vector<ConfidencePoint> confidence_points() const;
};

PooledPredictions pool_predictions(const Dataset& dataset);

namespace serial {
PooledPredictions pool_predictions(const Dataset& dataset);
}

struct CalibrationOptions {
  std::size_t bins = 10;
  std::size_t ranges = 10;
  double ace_threshold = 0.0;
  double alpha = 0.05;
};

struct CalibrationReport {
  double ece = 0.0;
  double sce = 0.0;
  double ace = 0.0;
  double coverage_pct = 0.0;
  double mean_width = 0.0;
  std::size_t n_points = 0;
  std::vector<BinStat> ece_bins;
  std::vector<std::vector<BinStat>> ace_bins;
};

CalibrationReport calibration_report(const PooledPredictions& pooled, const CalibrationOptions& options);

}  // namespace ueval
