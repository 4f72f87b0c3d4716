#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>
#include <json.hpp>

#include "ueval/core.hpp"

namespace ueval {

/// Top principal directions of centered data. Rows of `components` are orthonormal and
/// each row's largest-magnitude entry is positive.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;          // d_out x D
  Eigen::VectorXd explained_variance;  // non-increasing, length d_out

  std::size_t input_dim() const { return static_cast<std::size_t>(mean.size()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(components.rows()); }
  Eigen::VectorXd project(std::span<const double> x) const;
};

/// `features` is N x D. Requires N >= 2 and 1 <= d_out <= min(N, D); throws DataError
/// otherwise, and for data whose rows are all identical.
PcaModel fit_pca(const Eigen::MatrixXd& features, std::size_t d_out);

/// One Gaussian per class present in the training data.
struct GaussianComponent {
  int label = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // includes jitter
  Eigen::MatrixXd cholesky;    // lower factor of covariance
  double log_det = 0.0;
  double log_prior = 0.0;
  double jitter = 0.0;
};

struct GdaModel {
  std::size_t dim = 0;
  std::vector<GaussianComponent> components;
  std::vector<int> dropped_classes;  // classes with no training samples
  double jitter_used = 0.0;          // largest jitter any component needed
};

inline constexpr double kInitialJitter = 1e-6;
inline constexpr int kMaxJitterDoublings = 40;

/// Per-class mean and population covariance plus eps*I, eps starting at kInitialJitter and
/// doubling until the Cholesky factorization succeeds. Priors are class frequencies.
GdaModel fit_gda(const Eigen::MatrixXd& features, std::span<const int> labels, std::size_t classes);

/// log sum_k prior_k N(x; mu_k, Sigma_k), in nats.
double log_density(const GdaModel& model, std::span<const double> x);

/// Optional PCA projection followed by the class-conditional Gaussian mixture.
class DensityModel {
 public:
  DensityModel(std::optional<PcaModel> pca, GdaModel gda);

  /// Log density of a raw (unprojected) feature vector; confidence orientation.
  double score(std::span<const double> features) const;

  /// Scores each row of `features` (N x D), parallel over rows.
  std::vector<double> score_rows(const Eigen::MatrixXd& features) const;

  const std::optional<PcaModel>& pca() const { return pca_; }
  const GdaModel& gda() const { return gda_; }
  std::size_t input_dim() const;

  nlohmann::json to_json() const;
  static DensityModel from_json(const nlohmann::json& doc);
  void save(const std::filesystem::path& path) const;
  static DensityModel load(const std::filesystem::path& path);

 private:
  std::optional<PcaModel> pca_;
  GdaModel gda_;
};

namespace serial {
std::vector<double> score_rows(const DensityModel& model, const Eigen::MatrixXd& features);
}

/// Pools the features of all unmasked, labeled positions of `train` with their gold labels
/// and fits the density model. pca_dim = 0 disables the projection.
DensityModel fit_density(const Dataset& train, std::size_t pca_dim = 0);

}  // namespace ueval
