#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>
#include <fmt/format.h>

#include "common.hpp"
#include "ueval/cli.hpp"
#include "ueval/density.hpp"
#include "ueval/dump_io.hpp"
#include "ueval/error.hpp"

namespace ueval::cli {

namespace {

using nlohmann::ordered_json;

enum Column : std::size_t {
  kAccuracy,
  kMacroF1,
  kEce,
  kAce,
  kCoverage,
  kWidth,
  kAuroc,
  kAupr,
  kTokenTau,
  kSequenceTau,
};

using Values = std::array<std::optional<double>, kResultColumns.size()>;

struct SplitData {
  Split split;
  Dataset data;
};

// Metric-independent measurements of one seed on one split.
struct SplitMeasures {
  Values values{};
  std::optional<double> sce;
  std::optional<CalibrationReport> report;
  std::size_t records = 0;
  std::size_t positions = 0;
  std::size_t labeled_positions = 0;
};

// Observations of one (model, metric, split) cell group across seeds.
struct Accumulator {
  std::array<std::vector<double>, kResultColumns.size()> columns;
  std::vector<double> sce;
  std::size_t seeds = 0;
  std::size_t records = 0;
  std::size_t positions = 0;
  std::size_t labeled_positions = 0;
};

Cell summarize(const std::vector<double>& xs) {
  Cell c;
  c.seeds = xs.size();
  if (xs.empty()) return c;
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  c.mean = mean;
  if (xs.size() >= 2) {
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    c.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return c;
}

bool has_multi_sample(const Dataset& ds) {
  return std::any_of(ds.records.begin(), ds.records.end(),
                     [](const PredictionRecord& r) { return r.samples > 1; });
}

std::vector<MetricName> resolve_metrics(const EvaluateConfig& config, const std::vector<SplitData>& splits,
                                        const Dataset* train) {
  if (!config.metrics.empty()) return config.metrics;
  std::vector<MetricName> out = {MetricName::max_prob, MetricName::softmax_gap, MetricName::predictive_entropy};
  const bool logits = std::all_of(splits.begin(), splits.end(), [](const SplitData& s) { return s.data.has_logits(); });
  if (logits) out.push_back(MetricName::dempster_shafer);
  if (std::any_of(splits.begin(), splits.end(), [](const SplitData& s) { return has_multi_sample(s.data); })) {
    out.push_back(MetricName::class_variance);
    out.push_back(MetricName::mutual_information);
  }
  const bool features = std::all_of(splits.begin(), splits.end(), [](const SplitData& s) { return s.data.has_features(); });
  if (train && train->has_features() && features) out.push_back(MetricName::log_density);
  return out;
}

SplitMeasures measure_split(const Dataset& ds, const EvaluateConfig& config, const std::string& where,
                            std::vector<std::string>& warnings) {
  SplitMeasures m;
  m.records = ds.records.size();
  m.positions = ds.unmasked_count();
  const auto pooled = pool_predictions(ds);
  m.labeled_positions = pooled.dists.size();
  if (pooled.dists.empty()) return m;

  std::vector<int> predicted;
  predicted.reserve(pooled.dists.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pooled.dists.size(); ++i) {
    predicted.push_back(static_cast<int>(argmax(pooled.dists[i])));
    if (predicted.back() == pooled.gold[i]) ++correct;
  }
  m.values[kAccuracy] = static_cast<double>(correct) / static_cast<double>(predicted.size());
  m.values[kMacroF1] = macro_f1(predicted, pooled.gold);

  const auto& opt = config.calibration;
  CalibrationReport rep;
  const auto points = pooled.confidence_points();
  rep.n_points = points.size();
  rep.ece_bins = ece_bins(points, opt.bins);
  rep.ece = ece(points, opt.bins);
  rep.sce = sce(pooled.dists, pooled.gold, opt.bins);
  m.values[kEce] = rep.ece;
  m.sce = rep.sce;
  try {
    rep.ace_bins = ace_ranges(pooled.dists, pooled.gold, opt.ranges, opt.ace_threshold);
    rep.ace = ace(pooled.dists, pooled.gold, opt.ranges, opt.ace_threshold);
    m.values[kAce] = rep.ace;
  } catch (const DataError& e) {
    warnings.push_back(fmt::format("{}: ACE skipped: {}", where, e.what()));
  }
  const auto cov = coverage_stats(pooled.dists, pooled.gold, opt.alpha);
  rep.coverage_pct = cov.coverage;
  rep.mean_width = cov.mean_width;
  m.values[kCoverage] = cov.coverage;
  m.values[kWidth] = cov.mean_width;
  m.report = std::move(rep);
  return m;
}

std::optional<double> try_tau(const Dataset& ds, const MetricSeries& series, TauLevel level, TokenTauMode mode,
                              const std::string& where, std::vector<std::string>& warnings) {
  try {
    return loss_correlation(ds, series, level, mode);
  } catch (const UnavailableError&) {
    throw;
  } catch (const DataError& e) {
    warnings.push_back(fmt::format("{}: {} tau undefined: {}", where,
                                   level == TauLevel::token ? "token" : "sequence", e.what()));
    return std::nullopt;
  }
}

std::string reliability_csv(const CalibrationReport& rep) {
  std::string out = "bin,lo,hi,count,mean_confidence,accuracy\n";
  for (std::size_t b = 0; b < rep.ece_bins.size(); ++b) {
    const auto& s = rep.ece_bins[b];
    out += fmt::format("{},{},{},{},{},{}\n", b, detail::format_number(s.lo), detail::format_number(s.hi), s.count,
                       s.count ? detail::format_number(s.mean_confidence) : "",
                       s.count ? detail::format_number(s.accuracy) : "");
  }
  return out;
}

std::string file_safe(std::string s) {
  for (char& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  return s;
}

ordered_json cell_json(const Cell& c) {
  if (!c.mean) return nullptr;
  ordered_json j;
  j["mean"] = *c.mean;
  if (c.std) j["std"] = *c.std;
  j["seeds"] = c.seeds;
  return j;
}

}  // namespace

void EvaluateConfig::validate() const {
  if (models.empty()) throw ConfigError("evaluate: no model given (use --id or a config with 'models')");
  for (const auto& m : models) {
    if (m.name.empty()) throw ConfigError("evaluate: model without a name");
    if (m.runs.empty()) throw ConfigError(fmt::format("evaluate: model '{}' has no runs", m.name));
    for (const auto& r : m.runs)
      if (r.id_test.empty()) throw ConfigError(fmt::format("evaluate: model '{}' has a run without id_test", m.name));
  }
  if (calibration.bins == 0) throw ConfigError("evaluate: bins must be >= 1");
  if (calibration.ranges == 0) throw ConfigError("evaluate: ranges must be >= 1");
  if (!(calibration.alpha > 0.0 && calibration.alpha < 1.0)) throw ConfigError("evaluate: alpha must lie in (0, 1)");
  if (!(calibration.ace_threshold >= 0.0 && calibration.ace_threshold < 1.0))
    throw ConfigError("evaluate: ace_threshold must lie in [0, 1)");
}

double macro_f1(std::span<const int> predicted, std::span<const int> gold) {
  if (predicted.size() != gold.size() || gold.empty())
    throw DataError("macro-F1 needs equally many predictions and gold labels");
  std::map<int, std::array<double, 3>> counts;  // tp, fp, fn
  for (int g : gold) counts[g];
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predicted[i] == gold[i]) {
      counts[gold[i]][0] += 1.0;
    } else {
      counts[gold[i]][2] += 1.0;
      auto it = counts.find(predicted[i]);
      if (it != counts.end()) it->second[1] += 1.0;
    }
  }
  double total = 0.0;
  for (const auto& [cls, c] : counts) {
    const double denom = 2.0 * c[0] + c[1] + c[2];
    total += denom > 0.0 ? 2.0 * c[0] / denom : 0.0;
  }
  return total / static_cast<double>(counts.size());
}

ResultTable evaluate(const EvaluateConfig& config) {
  config.validate();
  ResultTable table;
  for (const auto& model : config.models) {
    std::vector<std::pair<std::pair<MetricName, Split>, Accumulator>> acc;
    auto slot = [&](MetricName metric, Split split) -> Accumulator& {
      for (auto& [key, a] : acc)
        if (key.first == metric && key.second == split) return a;
      acc.push_back({{metric, split}, Accumulator{}});
      return acc.back().second;
    };
    std::vector<MetricName> metrics;
    bool warned_single = false;

    for (std::size_t r = 0; r < model.runs.size(); ++r) {
      const auto& run = model.runs[r];
      const std::string where = fmt::format("model '{}' seed {}", model.name, r);
      std::vector<SplitData> splits;
      splits.push_back({Split::id_test, load_dump(run.id_test)});
      if (run.ood_test) {
        splits.push_back({Split::ood_test, load_dump(*run.ood_test)});
        if (splits[1].data.class_count != splits[0].data.class_count)
          throw DataError(fmt::format("{}: ID dump has {} classes but OOD dump has {}", where,
                                      splits[0].data.class_count, splits[1].data.class_count));
      }
      std::optional<Dataset> train;
      if (run.train) train = load_dump(*run.train);
      if (r == 0) metrics = resolve_metrics(config, splits, train ? &*train : nullptr);

      std::optional<DensityModel> density;
      if (std::find(metrics.begin(), metrics.end(), MetricName::log_density) != metrics.end()) {
        if (!train) throw UnavailableError(fmt::format("{}: log_density needs a train dump", where));
        density = fit_density(*train, config.pca_dim);
        for (int cls : density->gda().dropped_classes)
          table.warnings.push_back(fmt::format("{}: class {} has no training features and was dropped from the density model", where, cls));
      }

      std::vector<SplitMeasures> measures;
      for (const auto& s : splits) {
        measures.push_back(measure_split(s.data, config, fmt::format("{} {}", where, to_string(s.split)), table.warnings));
        if (config.reliability && measures.back().report)
          detail::write_file(config.output_dir / "reliability" /
                                 fmt::format("{}_seed{}_{}.csv", file_safe(model.name), r, to_string(s.split)),
                             reliability_csv(*measures.back().report));
      }

      for (MetricName metric : metrics) {
        std::vector<MetricSeries> series;
        for (const auto& s : splits) {
          series.push_back(compute_series(s.data, metric, config.aggregation, density ? &*density : nullptr));
          if (series.back().single_sample_tokens > 0 && !warned_single) {
            table.warnings.push_back(fmt::format(
                "{}: {} evaluated on single-sample predictions; the score is 0 there", where, to_string(metric)));
            warned_single = true;
          }
        }
        std::optional<double> auroc_value;
        std::optional<double> aupr_value;
        if (splits.size() == 2) {
          const auto id_scores = series[0].oriented_sequence_scores();
          const auto ood_scores = series[1].oriented_sequence_scores();
          if (id_scores.empty() || ood_scores.empty()) {
            table.warnings.push_back(fmt::format("{}: AUROC/AUPR skipped, a split has no scorable records", where));
          } else {
            auroc_value = auroc(id_scores, ood_scores);
            aupr_value = aupr(id_scores, ood_scores);
          }
        }
        for (std::size_t i = 0; i < splits.size(); ++i) {
          const auto& ds = splits[i].data;
          Values v = measures[i].values;
          const std::string tag = fmt::format("{} {} {}", where, to_string(splits[i].split), to_string(metric));
          if (measures[i].labeled_positions > 0 && ds.labeled()) {
            if (ds.task == Task::token_classification)
              v[kTokenTau] = try_tau(ds, series[i], TauLevel::token, config.token_tau, tag, table.warnings);
            v[kSequenceTau] = try_tau(ds, series[i], TauLevel::sequence, config.token_tau, tag, table.warnings);
          }
          if (splits[i].split == Split::ood_test) {
            v[kAuroc] = auroc_value;
            v[kAupr] = aupr_value;
          }
          auto& a = slot(metric, splits[i].split);
          ++a.seeds;
          a.records += measures[i].records;
          a.positions += measures[i].positions;
          a.labeled_positions += measures[i].labeled_positions;
          for (std::size_t c = 0; c < v.size(); ++c)
            if (v[c]) a.columns[c].push_back(*v[c]);
          if (measures[i].sce) a.sce.push_back(*measures[i].sce);
        }
      }
    }

    for (const auto& [key, a] : acc) {
      ResultRow row;
      row.model = model.name;
      row.metric = metric_id(key.first);
      row.split = key.second;
      for (std::size_t c = 0; c < row.cells.size(); ++c) row.cells[c] = summarize(a.columns[c]);
      row.sce = summarize(a.sce);
      row.seeds = a.seeds;
      row.records = a.records;
      row.positions = a.positions;
      row.labeled_positions = a.labeled_positions;
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

ordered_json to_json(const ResultTable& table, const EvaluateConfig& config) {
  ordered_json doc;
  ordered_json cfg;
  cfg["alpha"] = config.calibration.alpha;
  cfg["bins"] = config.calibration.bins;
  cfg["ranges"] = config.calibration.ranges;
  cfg["ace_threshold"] = config.calibration.ace_threshold;
  cfg["aggregation"] = to_string(config.aggregation);
  cfg["token_tau"] = config.token_tau == TokenTauMode::pooled ? "pooled" : "per_sequence_mean";
  cfg["pca_dim"] = config.pca_dim;
  cfg["auroc_level"] = "sequence";
  ordered_json models = ordered_json::array();
  for (const auto& m : config.models) {
    ordered_json mj;
    mj["name"] = m.name;
    mj["runs"] = ordered_json::array();
    for (const auto& r : m.runs) {
      ordered_json rj;
      rj["id_test"] = r.id_test.generic_string();
      if (r.ood_test) rj["ood_test"] = r.ood_test->generic_string();
      if (r.train) rj["train"] = r.train->generic_string();
      mj["runs"].push_back(rj);
    }
    models.push_back(mj);
  }
  cfg["models"] = models;
  doc["config"] = cfg;

  ordered_json rows = ordered_json::array();
  for (const auto& row : table.rows) {
    ordered_json rj;
    rj["model"] = row.model;
    rj["metric"] = to_string(row.metric.name);
    rj["polarity"] = to_string(row.metric.polarity);
    rj["arity"] = row.metric.arity == Arity::single ? "single" : row.metric.arity == Arity::multi ? "multi" : "feature";
    rj["split"] = to_string(row.split);
    rj["seeds"] = row.seeds;
    rj["records"] = row.records;
    rj["positions"] = row.positions;
    rj["labeled_positions"] = row.labeled_positions;
    ordered_json values;
    for (std::size_t c = 0; c < kResultColumns.size(); ++c) values[kResultColumns[c]] = cell_json(row.cells[c]);
    values["sce"] = cell_json(row.sce);
    rj["values"] = values;
    rows.push_back(rj);
  }
  doc["rows"] = rows;
  doc["warnings"] = table.warnings;
  return doc;
}

std::string to_csv(const ResultTable& table) {
  std::string out = "model,metric,split";
  for (const char* c : kResultColumns) out += fmt::format(",{0}_mean,{0}_std", c);
  out += '\n';
  for (const auto& row : table.rows) {
    std::string name = row.model;
    if (name.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char ch : name) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      name = quoted + "\"";
    }
    out += fmt::format("{},{},{}", name, to_string(row.metric.name), to_string(row.split));
    for (const auto& cell : row.cells)
      out += fmt::format(",{},{}", cell.mean ? detail::format_number(*cell.mean) : "",
                         cell.std ? detail::format_number(*cell.std) : "");
    out += '\n';
  }
  return out;
}

ResultTable cmd_evaluate(const EvaluateConfig& config) {
  auto table = evaluate(config);
  detail::write_file(config.output_dir / "results.json", to_json(table, config).dump(2) + "\n");
  detail::write_file(config.output_dir / "results.csv", to_csv(table));
  return table;
}

}  // namespace ueval::cli
