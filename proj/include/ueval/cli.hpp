#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>
#include <json.hpp>

#include "ueval/aso.hpp"
#include "ueval/calibration.hpp"
#include "ueval/discrimination.hpp"
#include "ueval/metrics.hpp"
#include "ueval/sampler.hpp"
#include "ueval/synth.hpp"

namespace ueval::cli {

namespace fs = std::filesystem;

/// Exit codes of the `ueval` binary.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;

/// Runs the command line; never throws. Diagnostics go to `err`, summaries to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// ---- evaluate -------------------------------------------------------------------------

/// Dumps of one training seed of a model.
struct RunPaths {
  fs::path id_test;
  std::optional<fs::path> ood_test;
  std::optional<fs::path> train;
};

struct ModelSpec {
  std::string name;
  std::vector<RunPaths> runs;
};

struct EvaluateConfig {
  std::vector<ModelSpec> models;
  /// Empty selects every metric the dumps support.
  std::vector<MetricName> metrics;
  CalibrationOptions calibration;
  Aggregation aggregation = Aggregation::mean;
  TokenTauMode token_tau = TokenTauMode::pooled;
  std::size_t pca_dim = 0;
  bool reliability = false;
  fs::path output_dir = ".";

  void validate() const;
};

/// Column order of the result table.
inline constexpr std::array<const char*, 10> kResultColumns = {
    "accuracy", "macro_f1", "ece", "ace", "coverage", "width", "auroc", "aupr", "token_tau", "sequence_tau"};

struct Cell {
  std::optional<double> mean;
  std::optional<double> std;  // only with two or more seeds
  std::size_t seeds = 0;
};

struct ResultRow {
  std::string model;
  MetricId metric{};
  Split split = Split::id_test;
  std::array<Cell, kResultColumns.size()> cells;
  Cell sce;
  std::size_t seeds = 0;
  std::size_t records = 0;    // summed over seeds
  std::size_t positions = 0;  // unmasked positions, summed over seeds
  std::size_t labeled_positions = 0;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::vector<std::string> warnings;
};

/// Macro-averaged F1 over classes that occur in `gold`.
double macro_f1(std::span<const int> predicted, std::span<const int> gold);

ResultTable evaluate(const EvaluateConfig& config);
nlohmann::ordered_json to_json(const ResultTable& table, const EvaluateConfig& config);
std::string to_csv(const ResultTable& table);
/// Evaluates and writes results.json, results.csv (and reliability CSVs) to output_dir.
ResultTable cmd_evaluate(const EvaluateConfig& config);

// ---- compare --------------------------------------------------------------------------

struct CompareConfig {
  std::vector<fs::path> score_files;
  std::vector<std::string> names;  // defaults to file stems
  std::string label;               // e.g. the metric the scores belong to
  AsoConfig aso;
  fs::path output_dir = ".";
};

/// One finite number per line; blank lines and lines starting with '#' are skipped.
std::vector<double> read_scores(const fs::path& path);
std::string format_dominance(const DominanceMatrix& matrix);
nlohmann::ordered_json to_json(const DominanceMatrix& matrix, const CompareConfig& config);
/// Writes aso.json and aso.txt.
DominanceMatrix cmd_compare(const CompareConfig& config);

// ---- subsample ------------------------------------------------------------------------

struct SubsampleConfig {
  fs::path corpus;
  std::size_t target_size = 0;
  std::uint64_t seed = 0;
  std::size_t top_k = 50;
  std::optional<CorpusTask> task;  // inferred from the corpus when absent
  fs::path output_dir = ".";
};

struct SubsampleResult {
  std::vector<std::size_t> indices;
  DistributionComparison comparison;
  std::string source_sha256;
};

/// Writes subsample.jsonl, subsample.manifest.json, comparison.json and
/// comparison_{lengths,labels,types}.csv.
SubsampleResult cmd_subsample(const SubsampleConfig& config);

// ---- synth ----------------------------------------------------------------------------

enum class SynthMode { id_ood, calibrated, multisample };

struct SynthConfig {
  SynthSpec spec;
  SynthMode mode = SynthMode::id_ood;
  fs::path output_dir = ".";
};

SynthMode parse_synth_mode(std::string_view name);
std::string_view to_string(SynthMode mode);

/// Writes the dumps and manifest.json.
SynthOutput cmd_synth(const SynthConfig& config);

}  // namespace ueval::cli
