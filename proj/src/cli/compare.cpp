#include <cmath>
#include <fstream>
#include <fmt/format.h>

#include "common.hpp"
#include "ueval/cli.hpp"
#include "ueval/error.hpp"

namespace ueval::cli {

using nlohmann::ordered_json;

std::vector<double> read_scores(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open score file '{}'", path.string()));
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    const std::string text = line.substr(first, last - first + 1);
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != text.size() || !std::isfinite(x))
      throw DataError(fmt::format("{}: line {}: '{}' is not a finite number", path.string(), line_no, text));
    out.push_back(x);
  }
  return out;
}

std::string format_dominance(const DominanceMatrix& m) {
  std::size_t width = 8;
  for (const auto& n : m.names) width = std::max(width, n.size());
  std::string out = fmt::format("{:<{}}", "eps_min", width);
  for (const auto& n : m.names) out += fmt::format("  {:>{}}", n, width);
  out += fmt::format("  {:>{}}\n", "dominant", 8);
  for (std::size_t i = 0; i < m.names.size(); ++i) {
    out += fmt::format("{:<{}}", m.names[i], width);
    for (std::size_t j = 0; j < m.names.size(); ++j) {
      if (i == j) {
        out += fmt::format("  {:>{}}", "-", width);
        continue;
      }
      const auto& r = m.results[i][j];
      out += fmt::format("  {:>{}}", fmt::format("{:.4f}{}", r.epsilon_min, r.dominant ? "*" : ""), width);
    }
    out += fmt::format("  {:>{}}\n", m.dominant_over_all[i] ? "yes" : "no", 8);
  }
  out += "row dominates column when eps_min <= threshold (marked *)\n";
  return out;
}

ordered_json to_json(const DominanceMatrix& m, const CompareConfig& config) {
  ordered_json doc;
  if (!config.label.empty()) doc["label"] = config.label;
  ordered_json aso;
  aso["confidence_alpha"] = config.aso.confidence_alpha;
  aso["decision_threshold"] = config.aso.decision_threshold;
  aso["n_bootstrap"] = config.aso.n_bootstrap;
  aso["quantile_grid"] = config.aso.quantile_grid;
  aso["seed"] = config.aso.seed;
  doc["aso"] = aso;
  doc["names"] = m.names;
  ordered_json pairs = ordered_json::array();
  for (std::size_t i = 0; i < m.names.size(); ++i)
    for (std::size_t j = 0; j < m.names.size(); ++j) {
      if (i == j) continue;
      const auto& r = m.results[i][j];
      ordered_json p;
      p["a"] = m.names[i];
      p["b"] = m.names[j];
      p["epsilon_hat"] = r.epsilon_hat;
      p["epsilon_min"] = r.epsilon_min;
      p["dominant"] = r.dominant;
      p["n_a"] = r.n_a;
      p["n_b"] = r.n_b;
      pairs.push_back(p);
    }
  doc["pairs"] = pairs;
  ordered_json dom = ordered_json::array();
  for (std::size_t i = 0; i < m.names.size(); ++i)
    if (m.dominant_over_all[i]) dom.push_back(m.names[i]);
  doc["dominant_over_all"] = dom;
  return doc;
}

DominanceMatrix cmd_compare(const CompareConfig& config) {
  if (config.score_files.size() < 2) throw ConfigError("compare: need at least two score files");
  if (!config.names.empty() && config.names.size() != config.score_files.size())
    throw ConfigError(fmt::format("compare: {} names for {} score files", config.names.size(), config.score_files.size()));
  config.aso.validate();
  std::vector<ScoreGroup> groups;
  for (std::size_t i = 0; i < config.score_files.size(); ++i) {
    ScoreGroup g;
    g.name = config.names.empty() ? config.score_files[i].stem().string() : config.names[i];
    g.scores = read_scores(config.score_files[i]);
    if (g.scores.size() < 2)
      throw DataError(fmt::format("score file '{}' holds {} values, need at least 2",
                                  config.score_files[i].string(), g.scores.size()));
    groups.push_back(std::move(g));
  }
  auto matrix = dominance_matrix(groups, config.aso);
  detail::write_file(config.output_dir / "aso.json", to_json(matrix, config).dump(2) + "\n");
  detail::write_file(config.output_dir / "aso.txt", format_dominance(matrix));
  return matrix;
}

}  // namespace ueval::cli
