#include "ueval/density.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <fmt/format.h>

#include "ueval/error.hpp"
#include "ueval/parallel.hpp"

namespace ueval {

namespace {

using json = nlohmann::json;

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}

json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::VectorXd row = m.row(i);
    rows.push_back(to_json(row));
  }
  return rows;
}

Eigen::VectorXd vector_from(const json& v) {
  auto xs = v.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

Eigen::MatrixXd matrix_from(const json& rows, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto row = vector_from(rows[i]);
    if (row.size() != cols) throw DataError("density model: ragged matrix");
    m.row(static_cast<Eigen::Index>(i)) = row;
  }
  return m;
}

double log_det_from_cholesky(const Eigen::MatrixXd& lower) {
  return 2.0 * lower.diagonal().array().log().sum();
}

}  // namespace

Eigen::VectorXd PcaModel::project(std::span<const double> x) const {
  if (x.size() != input_dim())
    throw DataError(fmt::format("PCA expects {} features, got {}", input_dim(), x.size()));
  return components * (as_vector(x) - mean);
}

PcaModel fit_pca(const Eigen::MatrixXd& features, std::size_t d_out) {
  const auto n = static_cast<std::size_t>(features.rows());
  const auto d = static_cast<std::size_t>(features.cols());
  if (n < 2) throw DataError("PCA needs at least two rows");
  if (d_out == 0 || d_out > std::min(n, d))
    throw DataError(fmt::format("PCA output dimension {} must be in [1, min(N={}, D={})]", d_out, n, d));

  PcaModel model;
  model.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - model.mean.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  if (!(cov.trace() > 0.0))
    throw DataError("PCA input rows are all identical; disable the projection (dimension 0)");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("PCA eigendecomposition failed");

  const auto out = static_cast<Eigen::Index>(d_out);
  model.components.resize(out, static_cast<Eigen::Index>(d));
  model.explained_variance.resize(out);
  // Eigen sorts eigenvalues ascending.
  for (Eigen::Index i = 0; i < out; ++i) {
    const Eigen::Index src = static_cast<Eigen::Index>(d) - 1 - i;
    Eigen::VectorXd v = eig.eigenvectors().col(src);
    Eigen::Index big = 0;
    v.cwiseAbs().maxCoeff(&big);
    if (v(big) < 0.0) v = -v;
    model.components.row(i) = v.transpose();
    model.explained_variance(i) = std::max(eig.eigenvalues()(src), 0.0);
  }
  return model;
}

GdaModel fit_gda(const Eigen::MatrixXd& features, std::span<const int> labels, std::size_t classes) {
  const auto n = static_cast<std::size_t>(features.rows());
  const auto d = features.cols();
  if (labels.size() != n)
    throw DataError(fmt::format("GDA got {} feature rows but {} labels", n, labels.size()));
  if (n == 0) throw DataError("GDA needs at least one sample");

  std::vector<std::vector<Eigen::Index>> members(classes);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw DataError(fmt::format("GDA label {} outside [0, {})", y, classes));
    members[static_cast<std::size_t>(y)].push_back(static_cast<Eigen::Index>(i));
  }

  GdaModel model;
  model.dim = static_cast<std::size_t>(d);
  for (std::size_t k = 0; k < classes; ++k) {
    const auto& rows = members[k];
    if (rows.empty()) {
      model.dropped_classes.push_back(static_cast<int>(k));
      continue;
    }
    GaussianComponent c;
    c.label = static_cast<int>(k);
    const auto nk = static_cast<double>(rows.size());
    c.mean = Eigen::VectorXd::Zero(d);
    for (auto i : rows) c.mean += features.row(i).transpose();
    c.mean /= nk;
    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
    for (auto i : rows) {
      const Eigen::VectorXd diff = features.row(i).transpose() - c.mean;
      scatter.noalias() += diff * diff.transpose();
    }
    scatter /= nk;

    double eps = kInitialJitter;
    bool ok = false;
    for (int attempt = 0; attempt <= kMaxJitterDoublings; ++attempt, eps *= 2.0) {
      Eigen::MatrixXd cov = scatter;
      cov.diagonal().array() += eps;
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      if (llt.info() != Eigen::Success) continue;
      Eigen::MatrixXd lower = llt.matrixL();
      const auto diag = lower.diagonal().array();
      if (!(diag > 0.0).all() || !diag.isFinite().all()) continue;
      c.covariance = std::move(cov);
      c.cholesky = std::move(lower);
      c.jitter = eps;
      ok = true;
      break;
    }
    if (!ok)
      throw NumericalError(fmt::format(
          "covariance of class {} is not positive definite after {} jitter doublings", k,
          kMaxJitterDoublings));
    c.log_det = log_det_from_cholesky(c.cholesky);
    c.log_prior = std::log(nk / static_cast<double>(n));
    model.jitter_used = std::max(model.jitter_used, c.jitter);
    model.components.push_back(std::move(c));
  }
  return model;
}

double log_density(const GdaModel& model, std::span<const double> x) {
  if (x.size() != model.dim)
    throw DataError(fmt::format("density model expects {} features, got {}", model.dim, x.size()));
  if (model.components.empty()) throw DataError("density model has no components");
  const auto point = as_vector(x);
  const double norm = 0.5 * static_cast<double>(model.dim) * std::log(2.0 * std::numbers::pi);
  std::vector<double> terms;
  terms.reserve(model.components.size());
  for (const auto& c : model.components) {
    const Eigen::VectorXd z = c.cholesky.triangularView<Eigen::Lower>().solve(point - c.mean);
    terms.push_back(c.log_prior - 0.5 * z.squaredNorm() - 0.5 * c.log_det - norm);
  }
  const double m = *std::max_element(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

DensityModel::DensityModel(std::optional<PcaModel> pca, GdaModel gda)
    : pca_(std::move(pca)), gda_(std::move(gda)) {
  if (pca_ && pca_->output_dim() != gda_.dim)
    throw DataError("PCA output dimension does not match the Gaussian mixture");
}

std::size_t DensityModel::input_dim() const { return pca_ ? pca_->input_dim() : gda_.dim; }

double DensityModel::score(std::span<const double> features) const {
  if (!pca_) return log_density(gda_, features);
  const Eigen::VectorXd projected = pca_->project(features);
  return log_density(gda_, std::span<const double>(projected.data(), projected.size()));
}

std::vector<double> DensityModel::score_rows(const Eigen::MatrixXd& features) const {
  std::vector<double> out(static_cast<std::size_t>(features.rows()));
  parallel::for_each_index(out.size(), [&](std::size_t i) {
    const Eigen::VectorXd row = features.row(static_cast<Eigen::Index>(i)).transpose();
    out[i] = score(std::span<const double>(row.data(), row.size()));
  });
  return out;
}

std::vector<double> serial::score_rows(const DensityModel& model, const Eigen::MatrixXd& features) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const Eigen::VectorXd row = features.row(i).transpose();
    out.push_back(model.score(std::span<const double>(row.data(), row.size())));
  }
  return out;
}

json DensityModel::to_json() const {
  json doc;
  doc["dim"] = gda_.dim;
  doc["jitter_used"] = gda_.jitter_used;
  doc["dropped_classes"] = gda_.dropped_classes;
  json comps = json::array();
  for (const auto& c : gda_.components) {
    json jc;
    jc["label"] = c.label;
    jc["mean"] = ueval::to_json(c.mean);
    jc["cholesky"] = ueval::to_json(c.cholesky);
    jc["log_prior"] = c.log_prior;
    jc["jitter"] = c.jitter;
    comps.push_back(std::move(jc));
  }
  doc["components"] = std::move(comps);
  if (pca_) {
    json p;
    p["mean"] = ueval::to_json(pca_->mean);
    p["components"] = ueval::to_json(pca_->components);
    p["explained_variance"] = ueval::to_json(pca_->explained_variance);
    doc["pca"] = std::move(p);
  } else {
    doc["pca"] = nullptr;
  }
  return doc;
}

DensityModel DensityModel::from_json(const json& doc) {
  try {
    GdaModel gda;
    gda.dim = doc.at("dim").get<std::size_t>();
    gda.jitter_used = doc.at("jitter_used").get<double>();
    gda.dropped_classes = doc.at("dropped_classes").get<std::vector<int>>();
    const auto d = static_cast<Eigen::Index>(gda.dim);
    for (const auto& jc : doc.at("components")) {
      GaussianComponent c;
      c.label = jc.at("label").get<int>();
      c.mean = vector_from(jc.at("mean"));
      c.cholesky = matrix_from(jc.at("cholesky"), d);
      if (c.mean.size() != d || c.cholesky.rows() != d)
        throw DataError("density model: component dimension mismatch");
      c.covariance = c.cholesky * c.cholesky.transpose();
      c.log_det = log_det_from_cholesky(c.cholesky);
      c.log_prior = jc.at("log_prior").get<double>();
      c.jitter = jc.at("jitter").get<double>();
      gda.components.push_back(std::move(c));
    }
    std::optional<PcaModel> pca;
    if (const auto& p = doc.at("pca"); !p.is_null()) {
      PcaModel m;
      m.mean = vector_from(p.at("mean"));
      m.components = matrix_from(p.at("components"), m.mean.size());
      m.explained_variance = vector_from(p.at("explained_variance"));
      pca = std::move(m);
    }
    return DensityModel(std::move(pca), std::move(gda));
  } catch (const json::exception& e) {
    throw DataError(fmt::format("malformed density model: {}", e.what()));
  }
}

void DensityModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write density model '{}'", path.string()));
  out << to_json().dump(2) << '\n';
}

DensityModel DensityModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open density model '{}'", path.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return from_json(doc);
}

DensityModel fit_density(const Dataset& train, std::size_t pca_dim) {
  if (!train.has_features()) throw UnavailableError("density fit needs features in every train record");
  if (!train.labeled()) throw DataError("density fit needs gold labels on the train split");
  const std::size_t dim = train.records.front().feature_dim;
  std::vector<int> labels;
  std::vector<double> rows;
  for (const auto& r : train.records) {
    if (r.feature_dim != dim)
      throw DataError(fmt::format("record '{}' has {} features, expected {}", r.id, r.feature_dim, dim));
    for (std::size_t t = 0; t < r.steps; ++t) {
      if (!r.mask[t]) continue;
      auto f = r.step_features(t);
      rows.insert(rows.end(), f.begin(), f.end());
      labels.push_back(r.gold[t]);
    }
  }
  if (labels.empty()) throw DataError("density fit found no unmasked train positions");
  Eigen::MatrixXd x = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      rows.data(), static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(dim));

  std::optional<PcaModel> pca;
  if (pca_dim > 0) {
    pca = fit_pca(x, pca_dim);
    x = ((x.rowwise() - pca->mean.transpose()) * pca->components.transpose()).eval();
  }
  GdaModel gda = fit_gda(x, labels, train.class_count);
  return DensityModel(std::move(pca), std::move(gda));
}

}  // namespace ueval
