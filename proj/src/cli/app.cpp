#include <ostream>
#include <CLI11.hpp>
#include <fmt/format.h>

#include "common.hpp"
#include "ueval/cli.hpp"
#include "ueval/error.hpp"
#include "ueval/parallel.hpp"

namespace ueval::cli {

namespace {

using nlohmann::json;
using detail::get;

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  std::string output_dir;
  int threads = 0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* output_opt = nullptr;
};

// Config document plus the directory its relative paths resolve against.
struct ConfigDoc {
  json doc = json::object();
  fs::path base = ".";
};

ConfigDoc read_config(const Globals& g, std::initializer_list<const char*> keys, const char* what) {
  ConfigDoc c;
  if (g.config.empty()) return c;
  c.doc = detail::load_config(g.config);
  detail::check_keys(c.doc, keys, what);
  c.base = fs::path(g.config).parent_path();
  if (c.base.empty()) c.base = ".";
  return c;
}

template <typename T>
void apply(CLI::Option* opt, const T& flag, T& target) {
  if (opt->count() > 0) target = flag;
}

fs::path output_dir(const Globals& g, const ConfigDoc& c) {
  if (g.output_opt->count() > 0) return g.output_dir;
  if (auto p = get<std::string>(c.doc, "output_dir")) return detail::resolve(c.base, *p);
  return ".";
}

std::uint64_t seed(const Globals& g, const ConfigDoc& c, std::uint64_t fallback) {
  if (g.seed_opt->count() > 0) return g.seed;
  return get<std::size_t>(c.doc, "seed").value_or(fallback);
}

// ---- evaluate ----

struct EvaluateFlags {
  std::vector<std::string> id, ood, train, metrics;
  std::string model = "model";
  double alpha = 0.05;
  double ace_threshold = 0.0;
  std::size_t bins = 10, ranges = 10, pca_dim = 0;
  std::string aggregation = "mean", token_tau = "pooled";
  bool reliability = false;
  CLI::Option *id_opt, *ood_opt, *train_opt, *metrics_opt, *model_opt, *alpha_opt, *ace_opt, *bins_opt,
      *ranges_opt, *pca_opt, *agg_opt, *tau_opt, *rel_opt;
};

TokenTauMode parse_tau_mode(std::string_view s) {
  if (s == "pooled") return TokenTauMode::pooled;
  if (s == "per_sequence_mean") return TokenTauMode::per_sequence_mean;
  throw ConfigError(fmt::format("unknown token_tau mode '{}' (expected pooled or per_sequence_mean)", s));
}

std::vector<MetricName> parse_metrics(const std::vector<std::string>& names) {
  std::vector<MetricName> out;
  for (const auto& n : names) out.push_back(parse_metric(n).name);
  return out;
}

EvaluateConfig build_evaluate(const Globals& g, const EvaluateFlags& f) {
  const auto c = read_config(g, {"models", "metrics", "alpha", "bins", "ranges", "ace_threshold", "aggregation",
                                 "token_tau", "pca_dim", "reliability", "output_dir", "seed", "threads"},
                             "evaluate config");
  EvaluateConfig cfg;
  if (c.doc.contains("models")) {
    const auto& models = c.doc.at("models");
    if (!models.is_array()) throw ConfigError("'models' must be an array");
    for (const auto& mj : models) {
      detail::check_keys(mj, {"name", "runs"}, "model entry");
      ModelSpec m;
      m.name = get<std::string>(mj, "name").value_or("");
      if (!mj.contains("runs") || !mj.at("runs").is_array()) throw ConfigError(fmt::format("model '{}' needs a 'runs' array", m.name));
      for (const auto& rj : mj.at("runs")) {
        detail::check_keys(rj, {"id_test", "ood_test", "train"}, "run entry");
        RunPaths r;
        r.id_test = detail::resolve(c.base, get<std::string>(rj, "id_test").value_or(""));
        if (auto p = get<std::string>(rj, "ood_test")) r.ood_test = detail::resolve(c.base, *p);
        if (auto p = get<std::string>(rj, "train")) r.train = detail::resolve(c.base, *p);
        if (!rj.contains("id_test")) r.id_test.clear();
        m.runs.push_back(r);
      }
      cfg.models.push_back(std::move(m));
    }
  }
  if (auto v = get<std::vector<std::string>>(c.doc, "metrics")) cfg.metrics = parse_metrics(*v);
  if (auto v = get<double>(c.doc, "alpha")) cfg.calibration.alpha = *v;
  if (auto v = get<std::size_t>(c.doc, "bins")) cfg.calibration.bins = *v;
  if (auto v = get<std::size_t>(c.doc, "ranges")) cfg.calibration.ranges = *v;
  if (auto v = get<double>(c.doc, "ace_threshold")) cfg.calibration.ace_threshold = *v;
  if (auto v = get<std::string>(c.doc, "aggregation")) cfg.aggregation = parse_aggregation(*v);
  if (auto v = get<std::string>(c.doc, "token_tau")) cfg.token_tau = parse_tau_mode(*v);
  if (auto v = get<std::size_t>(c.doc, "pca_dim")) cfg.pca_dim = *v;
  if (auto v = get<bool>(c.doc, "reliability")) cfg.reliability = *v;

  if (f.id_opt->count() > 0) {
    if (f.ood_opt->count() > 0 && f.ood.size() != f.id.size())
      throw ConfigError(fmt::format("--ood given {} times but --id {} times", f.ood.size(), f.id.size()));
    if (f.train_opt->count() > 0 && f.train.size() != f.id.size())
      throw ConfigError(fmt::format("--train given {} times but --id {} times", f.train.size(), f.id.size()));
    ModelSpec m;
    m.name = f.model;
    for (std::size_t i = 0; i < f.id.size(); ++i) {
      RunPaths r;
      r.id_test = f.id[i];
      if (!f.ood.empty()) r.ood_test = f.ood[i];
      if (!f.train.empty()) r.train = f.train[i];
      m.runs.push_back(r);
    }
    cfg.models = {m};
  } else if (f.ood_opt->count() > 0 || f.train_opt->count() > 0) {
    throw ConfigError("--ood and --train need --id");
  } else if (f.model_opt->count() > 0 && cfg.models.size() == 1) {
    cfg.models[0].name = f.model;
  }
  if (f.metrics_opt->count() > 0) cfg.metrics = parse_metrics(f.metrics);
  apply(f.alpha_opt, f.alpha, cfg.calibration.alpha);
  apply(f.bins_opt, f.bins, cfg.calibration.bins);
  apply(f.ranges_opt, f.ranges, cfg.calibration.ranges);
  apply(f.ace_opt, f.ace_threshold, cfg.calibration.ace_threshold);
  apply(f.pca_opt, f.pca_dim, cfg.pca_dim);
  if (f.agg_opt->count() > 0) cfg.aggregation = parse_aggregation(f.aggregation);
  if (f.tau_opt->count() > 0) cfg.token_tau = parse_tau_mode(f.token_tau);
  if (f.rel_opt->count() > 0) cfg.reliability = f.reliability;
  cfg.output_dir = output_dir(g, c);
  return cfg;
}

// ---- compare ----

struct CompareFlags {
  std::vector<std::string> files, names;
  std::string label;
  double alpha = 0.05, threshold = 0.3;
  std::size_t bootstrap = 1000, grid = 1000;
  CLI::Option *files_opt, *names_opt, *label_opt, *alpha_opt, *threshold_opt, *bootstrap_opt, *grid_opt;
};

CompareConfig build_compare(const Globals& g, const CompareFlags& f) {
  const auto c = read_config(g, {"score_files", "names", "label", "confidence_alpha", "decision_threshold",
                                 "n_bootstrap", "quantile_grid", "output_dir", "seed", "threads"},
                             "compare config");
  CompareConfig cfg;
  if (auto v = get<std::vector<std::string>>(c.doc, "score_files"))
    for (const auto& p : *v) cfg.score_files.push_back(detail::resolve(c.base, p));
  if (auto v = get<std::vector<std::string>>(c.doc, "names")) cfg.names = *v;
  if (auto v = get<std::string>(c.doc, "label")) cfg.label = *v;
  if (auto v = get<double>(c.doc, "confidence_alpha")) cfg.aso.confidence_alpha = *v;
  if (auto v = get<double>(c.doc, "decision_threshold")) cfg.aso.decision_threshold = *v;
  if (auto v = get<std::size_t>(c.doc, "n_bootstrap")) cfg.aso.n_bootstrap = *v;
  if (auto v = get<std::size_t>(c.doc, "quantile_grid")) cfg.aso.quantile_grid = *v;
  if (f.files_opt->count() > 0) cfg.score_files.assign(f.files.begin(), f.files.end());
  if (f.names_opt->count() > 0) cfg.names = f.names;
  apply(f.label_opt, f.label, cfg.label);
  apply(f.alpha_opt, f.alpha, cfg.aso.confidence_alpha);
  apply(f.threshold_opt, f.threshold, cfg.aso.decision_threshold);
  apply(f.bootstrap_opt, f.bootstrap, cfg.aso.n_bootstrap);
  apply(f.grid_opt, f.grid, cfg.aso.quantile_grid);
  cfg.aso.seed = seed(g, c, cfg.aso.seed);
  cfg.output_dir = output_dir(g, c);
  return cfg;
}

// ---- subsample ----

struct SubsampleFlags {
  std::string corpus, task;
  std::size_t target = 0, top_k = 50;
  CLI::Option *corpus_opt, *task_opt, *target_opt, *top_k_opt;
};

SubsampleConfig build_subsample(const Globals& g, const SubsampleFlags& f) {
  const auto c = read_config(g, {"corpus", "target_size", "top_k", "task", "output_dir", "seed", "threads"},
                             "subsample config");
  SubsampleConfig cfg;
  if (auto v = get<std::string>(c.doc, "corpus")) cfg.corpus = detail::resolve(c.base, *v);
  if (auto v = get<std::size_t>(c.doc, "target_size")) cfg.target_size = *v;
  if (auto v = get<std::size_t>(c.doc, "top_k")) cfg.top_k = *v;
  if (auto v = get<std::string>(c.doc, "task")) cfg.task = parse_corpus_task(*v);
  if (f.corpus_opt->count() > 0) cfg.corpus = f.corpus;
  apply(f.target_opt, f.target, cfg.target_size);
  apply(f.top_k_opt, f.top_k, cfg.top_k);
  if (f.task_opt->count() > 0) cfg.task = parse_corpus_task(f.task);
  if (cfg.target_size == 0) throw ConfigError("subsample: --target must be >= 1");
  cfg.seed = seed(g, c, 0);
  cfg.output_dir = output_dir(g, c);
  return cfg;
}

// ---- synth ----

struct SynthFlags {
  SynthSpec spec;
  std::string mode = "id_ood";
  std::vector<std::pair<CLI::Option*, std::function<void(SynthSpec&)>>> overrides;
  CLI::Option* mode_opt = nullptr;
};

template <typename T>
void synth_flag(CLI::App* sub, SynthFlags& f, const std::string& name, T SynthSpec::*field, const std::string& help) {
  auto* opt = sub->add_option(name, f.spec.*field, help);
  f.overrides.emplace_back(opt, [&f, field](SynthSpec& s) { s.*field = f.spec.*field; });
}

SynthConfig build_synth(const Globals& g, const SynthFlags& f) {
  ConfigDoc c;
  if (!g.config.empty()) {
    c.doc = detail::load_config(g.config);
    c.base = fs::path(g.config).parent_path();
    if (c.base.empty()) c.base = ".";
  }
  SynthConfig cfg;
  json spec_doc = c.doc;
  if (spec_doc.is_object()) {
    if (auto v = get<std::string>(spec_doc, "mode")) cfg.mode = parse_synth_mode(*v);
    spec_doc.erase("mode");
    spec_doc.erase("output_dir");
    spec_doc.erase("threads");
  }
  cfg.spec = synth_spec_from_json(spec_doc);
  for (const auto& [opt, set] : f.overrides)
    if (opt->count() > 0) set(cfg.spec);
  if (f.mode_opt->count() > 0) cfg.mode = parse_synth_mode(f.mode);
  cfg.spec.seed = seed(g, c, cfg.spec.seed);
  cfg.spec.validate();
  cfg.output_dir = output_dir(g, c);
  return cfg;
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Uncertainty, calibration and OOD evaluation of classifier prediction dumps", "ueval"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON config file; flags override its values");
  g.seed_opt = app.add_option("--seed", g.seed, "Random seed");
  g.output_opt = app.add_option("--output-dir", g.output_dir, "Directory for output artifacts");
  app.add_option("--threads", g.threads, "Worker threads (0 = OpenMP default)")->check(CLI::NonNegativeNumber);

  auto* eval = app.add_subcommand("evaluate", "Score prediction dumps and write the result table");
  EvaluateFlags ef;
  ef.id_opt = eval->add_option("--id", ef.id, "ID test dump (repeat once per seed)");
  ef.ood_opt = eval->add_option("--ood", ef.ood, "OOD test dump (repeat once per seed)");
  ef.train_opt = eval->add_option("--train", ef.train, "Training dump with features, for log_density");
  ef.model_opt = eval->add_option("--model", ef.model, "Model name for --id runs");
  ef.metrics_opt = eval->add_option("--metrics", ef.metrics, "Metrics to report (default: all available)")->delimiter(',');
  ef.alpha_opt = eval->add_option("--alpha", ef.alpha, "Prediction-set miscoverage level");
  ef.bins_opt = eval->add_option("--bins", ef.bins, "ECE/SCE bins");
  ef.ranges_opt = eval->add_option("--ranges", ef.ranges, "ACE ranges");
  ef.ace_opt = eval->add_option("--ace-threshold", ef.ace_threshold, "ACE probability threshold");
  ef.agg_opt = eval->add_option("--aggregation", ef.aggregation, "Sequence aggregation: mean or max");
  ef.tau_opt = eval->add_option("--token-tau", ef.token_tau, "Token tau: pooled or per_sequence_mean");
  ef.pca_opt = eval->add_option("--pca-dim", ef.pca_dim, "PCA dimension before the density fit (0 = off)");
  ef.rel_opt = eval->add_flag("--reliability", ef.reliability, "Write reliability-diagram CSVs");

  auto* cmp = app.add_subcommand("compare", "Almost stochastic order test between score files");
  CompareFlags cf;
  cf.files_opt = cmp->add_option("files", cf.files, "Score files, one number per line");
  cf.names_opt = cmp->add_option("--names", cf.names, "Group names (default: file stems)")->delimiter(',');
  cf.label_opt = cmp->add_option("--label", cf.label, "Label recorded in the report, e.g. the metric");
  cf.alpha_opt = cmp->add_option("--confidence-alpha", cf.alpha, "Confidence level alpha");
  cf.threshold_opt = cmp->add_option("--threshold", cf.threshold, "Dominance threshold on eps_min");
  cf.bootstrap_opt = cmp->add_option("--bootstrap", cf.bootstrap, "Bootstrap resamples");
  cf.grid_opt = cmp->add_option("--grid", cf.grid, "Quantile grid size");

  auto* sub = app.add_subcommand("subsample", "Stratified corpus sub-sampling with a distribution report");
  SubsampleFlags sf;
  sf.corpus_opt = sub->add_option("corpus", sf.corpus, "Corpus JSONL");
  sf.target_opt = sub->add_option("--target", sf.target, "Number of sequences to draw");
  sf.task_opt = sub->add_option("--task", sf.task, "sequence_cls or token_cls (default: inferred)");
  sf.top_k_opt = sub->add_option("--top-k", sf.top_k, "Types compared in the report");

  auto* syn = app.add_subcommand("synth", "Write synthetic prediction dumps with known ground truth");
  SynthFlags yf;
  yf.mode_opt = syn->add_option("--mode", yf.mode, "id_ood, calibrated or multisample");
  synth_flag(syn, yf, "--n-id", &SynthSpec::n_id, "ID records");
  synth_flag(syn, yf, "--n-ood", &SynthSpec::n_ood, "OOD records");
  synth_flag(syn, yf, "--n-train", &SynthSpec::n_train, "Training records");
  synth_flag(syn, yf, "--classes", &SynthSpec::classes, "Classes K");
  synth_flag(syn, yf, "--samples", &SynthSpec::samples, "Samples per prediction S");
  synth_flag(syn, yf, "--steps", &SynthSpec::steps, "Steps per record T");
  synth_flag(syn, yf, "--id-concentration", &SynthSpec::id_concentration, "ID Dirichlet tilt");
  synth_flag(syn, yf, "--ood-concentration", &SynthSpec::ood_concentration, "OOD Dirichlet tilt");
  synth_flag(syn, yf, "--dirichlet-base", &SynthSpec::dirichlet_base, "Base Dirichlet concentration");
  synth_flag(syn, yf, "--noise", &SynthSpec::intra_sample_noise, "Intra-sample log-probability noise");
  synth_flag(syn, yf, "--calibrated", &SynthSpec::calibrated, "Draw gold from the predicted distribution");
  synth_flag(syn, yf, "--feature-dim", &SynthSpec::feature_dim, "Feature dimension (0 = none)");
  synth_flag(syn, yf, "--feature-separation", &SynthSpec::feature_separation, "Class mean distance");
  synth_flag(syn, yf, "--ood-feature-shift", &SynthSpec::ood_feature_shift, "OOD feature shift");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (g.threads > 0) parallel::set_threads(g.threads);
    if (eval->parsed()) {
      const auto cfg = build_evaluate(g, ef);
      const auto table = cmd_evaluate(cfg);
      print_warnings(table.warnings, err);
      out << fmt::format("evaluate: {} rows written to {}\n", table.rows.size(), (cfg.output_dir / "results.csv").string());
    } else if (cmp->parsed()) {
      const auto cfg = build_compare(g, cf);
      const auto matrix = cmd_compare(cfg);
      out << format_dominance(matrix);
    } else if (sub->parsed()) {
      const auto cfg = build_subsample(g, sf);
      const auto res = cmd_subsample(cfg);
      out << fmt::format("subsample: {} sequences; JS length {:.4f}, label {:.4f}, top-{} types {:.4f}\n",
                         res.indices.size(), res.comparison.length_js, res.comparison.label_js,
                         res.comparison.top_k, res.comparison.top_type_js);
    } else if (syn->parsed()) {
      const auto cfg = build_synth(g, yf);
      const auto res = cmd_synth(cfg);
      out << fmt::format("synth: wrote {} ID, {} OOD and {} train records to {}\n", res.id.records.size(),
                         res.ood.records.size(), res.train.records.size(), cfg.output_dir.string());
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace ueval::cli
