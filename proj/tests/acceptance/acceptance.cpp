// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <json.hpp>

#include <fmt/core.h>

#include "generators.hpp"
#include "oracles.hpp"
#include "ueval/aso.hpp"
#include "ueval/calibration.hpp"
#include "ueval/cli.hpp"
#include "ueval/density.hpp"
#include "ueval/discrimination.hpp"
#include "ueval/error.hpp"
#include "ueval/metrics.hpp"
#include "ueval/sampler.hpp"
#include "ueval/synth.hpp"

using namespace ueval;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. MI identity, pre-clamp MI sign, entropy range.
Outcome metric_identities() {
  Outcome o;
  Rng rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 10000 && o.pass; ++trial) {
    const std::size_t k = 1 + rng.below(50);
    const std::size_t s = 1 + rng.below(20);
    const auto set = gen::sample_set(rng, s, k);
    MutualInformation mi;
    try {
      mi = mutual_information(set);
    } catch (const NumericalError& e) {
      o.check(false, fmt::format("trial {}: {}", trial, e.what()));
      break;
    }
    std::vector<double> mean(k, 0.0);
    double mean_h = 0.0;
    for (const auto& d : set.dists) {
      for (std::size_t c = 0; c < k; ++c) mean[c] += d.probs[c] / static_cast<double>(s);
      mean_h += oracle::entropy(d.probs) / static_cast<double>(s);
    }
    const double expected = std::max(0.0, oracle::entropy(mean) - mean_h);
    worst = std::max(worst, std::abs(mi.value - expected));
    o.check(std::abs(mi.value - expected) <= 1e-9, fmt::format("trial {}: MI off by {:.3g}", trial, mi.value - expected));
    o.check(mi.total_entropy - mi.aleatoric >= -1e-8, fmt::format("trial {}: pre-clamp MI negative", trial));
    for (const auto& d : set.dists) {
      const double h = predictive_entropy(d);
      o.check(h >= 0.0 && h <= std::log(static_cast<double>(k)) + 1e-12, fmt::format("trial {}: entropy {} out of range", trial, h));
    }
  }
  if (o.pass) o.detail = fmt::format("10000 sets, max |MI - oracle| = {:.2e}", worst);
  return o;
}

// 2. Fast AUROC and tau-b against O(n^2) oracles.
Outcome oracle_equivalence() {
  Outcome o;
  Rng rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const bool ties = trial % 2 == 0;
    const auto id = gen::scores(rng, 1 + rng.below(200), ties);
    const auto ood = gen::scores(rng, 1 + rng.below(200), ties, 0.5);
    const double da = std::abs(auroc(id, ood) - oracle::auroc(id, ood));
    const std::size_t n = 2 + rng.below(199);
    auto x = gen::scores(rng, n, ties);
    auto y = gen::scores(rng, n, ties);
    // avoid the undefined constant case
    x[0] = -1.0;
    y[0] = -1.0;
    const double dt = std::abs(kendall_tau(x, y) - oracle::kendall_tau_b(x, y));
    worst = std::max({worst, da, dt});
    o.check(da <= 1e-12 && dt <= 1e-12, fmt::format("trial {}: auroc diff {:.3g}, tau diff {:.3g}", trial, da, dt));
  }
  if (o.pass) o.detail = fmt::format("500 instances, max diff = {:.2e}", worst);
  return o;
}

// 3. Calibrated data is calibrated.
Outcome calibration_soundness() {
  Outcome o;
  SynthSpec spec;
  spec.n_id = 50000;
  spec.classes = 10;
  spec.seed = 303;
  const auto pooled = pool_predictions(gen_calibrated(spec));
  CalibrationOptions opts;  // 10 bins, 10 ranges, alpha 0.05
  const auto rep = calibration_report(pooled, opts);
  o.check(rep.ece <= 0.02, fmt::format("ECE {:.4f} > 0.02", rep.ece));
  o.check(rep.ace <= 0.03, fmt::format("ACE {:.4f} > 0.03", rep.ace));
  o.check(rep.coverage_pct >= 0.93 && rep.coverage_pct <= 0.97, fmt::format("coverage {:.4f} outside [0.93, 0.97]", rep.coverage_pct));
  if (o.pass) o.detail = fmt::format("ECE {:.4f}, ACE {:.4f}, coverage {:.4f}", rep.ece, rep.ace, rep.coverage_pct);
  return o;
}

// 4. Prediction sets reach 1 - alpha and are minimal.
Outcome prediction_set_contract() {
  Outcome o;
  Rng rng(404);
  constexpr double target = 0.95;
  constexpr double tol = 1e-12;  // summation rounding
  for (int trial = 0; trial < 10000; ++trial) {
    const auto d = gen::distribution(rng, 2 + rng.below(30));
    const auto set = prediction_set(d, 0.05);
    double mass = 0.0;
    for (auto c : set.classes) mass += d.probs[c];
    const double without_last = mass - d.probs[set.classes.back()];
    o.check(mass >= target - tol, fmt::format("trial {}: mass {}", trial, mass));
    o.check(without_last < target - tol || set.width() == 0, fmt::format("trial {}: set not minimal", trial));
  }
  if (o.pass) o.detail = "10000 distributions";
  return o;
}

// 5. ASO symmetry, separation and false-positive rate.
Outcome aso_properties() {
  Outcome o;
  Rng rng(505);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> a(2 + rng.below(30)), b(2 + rng.below(30));
    for (auto& x : a) x = rng.uniform();
    for (auto& x : b) x = rng.uniform() + 0.1;
    const double sum = violation_ratio(a, b) + violation_ratio(b, a);
    o.check(std::abs(sum - 1.0) <= 1e-9, fmt::format("pair {}: eps(a,b) + eps(b,a) = {}", trial, sum));
  }
  AsoConfig cfg;
  std::vector<double> hi(10), lo(10);
  for (std::size_t i = 0; i < 10; ++i) {
    hi[i] = 0.9 + 0.005 * static_cast<double>(i);
    lo[i] = 0.4 + 0.005 * static_cast<double>(i);
  }
  const auto sep = aso_min_epsilon(hi, lo, cfg);
  o.check(sep.epsilon_min <= 0.05 && sep.dominant, fmt::format("separated eps_min {}", sep.epsilon_min));

  int dominant = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::mt19937_64 eng(static_cast<std::uint64_t>(trial));
    std::normal_distribution<double> nd(0.8, 0.05);
    std::vector<double> a(5), b(5);
    for (auto& x : a) x = nd(eng);
    for (auto& x : b) x = nd(eng);
    cfg.seed = static_cast<std::uint64_t>(trial);
    if (aso_min_epsilon(a, b, cfg).dominant) ++dominant;
  }
  o.check(dominant <= 20, fmt::format("{} / 200 identical-distribution pairs dominant", dominant));
  if (o.pass) o.detail = fmt::format("separated eps_min {:.3f}, {} / 200 false dominance", sep.epsilon_min, dominant);
  return o;
}

// 6. GDA converges to the true mixture; density separates near and far features.
Outcome density() {
  Outcome o;
  std::mt19937_64 eng(606);
  std::normal_distribution<double> n01;
  const std::size_t per = 10000;
  // class 0: mean (0, 0), cov [[1, 0.5], [0.5, 2]]; class 1: mean (3, 1), cov [[0.5, 0], [0, 0.25]]
  auto draw = [&](int c) -> std::pair<double, double> {
    const double z0 = n01(eng), z1 = n01(eng);
    if (c == 0) return {z0, 0.5 * z0 + std::sqrt(1.75) * z1};
    return {3.0 + std::sqrt(0.5) * z0, 1.0 + 0.5 * z1};
  };
  Eigen::MatrixXd x(2 * per, 2);
  std::vector<int> labels(2 * per);
  for (std::size_t i = 0; i < 2 * per; ++i) {
    labels[i] = i < per ? 0 : 1;
    const auto [a, b] = draw(labels[i]);
    x(static_cast<Eigen::Index>(i), 0) = a;
    x(static_cast<Eigen::Index>(i), 1) = b;
  }
  const auto model = fit_gda(x, labels, 2);
  double err = 0.0;
  const int held_out = 4000;
  for (int i = 0; i < held_out; ++i) {
    const auto [a, b] = draw(i % 2);
    const double l0 = std::log(0.5) + oracle::gaussian_logpdf_2d(a, b, 0, 0, 1, 0.5, 2);
    const double l1 = std::log(0.5) + oracle::gaussian_logpdf_2d(a, b, 3, 1, 0.5, 0, 0.25);
    const double m = std::max(l0, l1);
    const double truth = m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
    err += std::abs(log_density(model, std::vector<double>{a, b}) - truth);
  }
  const double mae = err / held_out;
  o.check(mae < 0.05, fmt::format("MAE {:.4f} nats", mae));

  SynthSpec spec;
  spec.n_id = 2000;
  spec.n_ood = 2000;
  spec.n_train = 5000;
  spec.feature_dim = 8;
  spec.seed = 607;
  const auto out = gen_id_ood(spec);
  const auto dm = fit_density(out.train);
  const auto id = compute_series(out.id, MetricName::log_density, Aggregation::mean, &dm);
  const auto ood = compute_series(out.ood, MetricName::log_density, Aggregation::mean, &dm);
  const double a = auroc(id.oriented_sequence_scores(), ood.oriented_sequence_scores());
  o.check(a >= 0.95, fmt::format("near/far AUROC {:.4f}", a));
  if (o.pass) o.detail = fmt::format("MAE {:.4f} nats, near/far AUROC {:.4f}", mae, a);
  return o;
}

// 7. Sampler keeps label and length distributions at n = 1000.
Outcome sampler_fidelity() {
  Outcome o;
  CorpusSpec cs;
  cs.n = 20000;
  cs.seed = 707;
  const auto corpus = gen_corpus(cs);
  double worst_label = 0.0, worst_length = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto idx = select(corpus, {1000, seed, corpus.task});
    std::vector<CorpusRecord> sample;
    for (auto i : idx) sample.push_back(corpus.records[i]);
    const auto cmp = compare_distributions(corpus.records, sample);
    worst_label = std::max(worst_label, cmp.label_js);
    worst_length = std::max(worst_length, cmp.length_js);
  }
  o.check(worst_label <= 0.01, fmt::format("label JS {:.4g}", worst_label));
  o.check(worst_length <= 0.02, fmt::format("length JS {:.4g}", worst_length));
  if (o.pass) o.detail = fmt::format("max label JS {:.2e}, max length JS {:.2e} over 5 seeds", worst_label, worst_length);
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const nlohmann::json* find_row(const nlohmann::json& doc, const std::string& metric, const std::string& split) {
  for (const auto& r : doc.at("rows"))
    if (r.at("metric") == metric && r.at("split") == split) return &r;
  return nullptr;
}

// 8. synth -> evaluate reproduces the generator's ground truth; reruns are identical.
Outcome end_to_end() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / fmt::format("ueval_acceptance_{}", ::getpid());
  fs::remove_all(root);

  cli::SynthConfig sc;
  sc.spec.n_id = 3000;
  sc.spec.n_ood = 3000;
  sc.spec.steps = 3;
  sc.spec.id_concentration = 5.0;  // overlapping splits, AUROC well below 1
  sc.spec.seed = 808;
  sc.output_dir = root / "id_ood";
  cli::cmd_synth(sc);
  const auto manifest = nlohmann::json::parse(slurp(sc.output_dir / "manifest.json"));

  cli::EvaluateConfig ec;
  ec.models = {{"synthetic", {{sc.output_dir / "id_test.jsonl", sc.output_dir / "ood_test.jsonl", std::nullopt}}}};
  ec.metrics = {MetricName::predictive_entropy, MetricName::max_prob};
  ec.output_dir = root / "eval_a";
  cli::cmd_evaluate(ec);
  const auto results = nlohmann::json::parse(slurp(ec.output_dir / "results.json"));
  std::string aurocs;
  for (const char* m : {"predictive_entropy", "max_prob"}) {
    const auto* row = find_row(results, m, "ood_test");
    if (!row || row->at("values").at("auroc").is_null()) {
      o.check(false, fmt::format("no AUROC row for {}", m));
      continue;
    }
    const double got = row->at("values").at("auroc").at("mean");
    const double want = manifest.at("ground_truth").at("auroc").at(m);
    o.check(std::abs(got - want) <= 0.02, fmt::format("{} AUROC {:.4f} vs manifest {:.4f}", m, got, want));
    aurocs += fmt::format("{}{} {:.4f}/{:.4f}", aurocs.empty() ? "" : ", ", m, got, want);
  }

  cli::SynthConfig cal;
  cal.mode = cli::SynthMode::calibrated;
  cal.spec.n_id = 50000;
  cal.spec.seed = 809;
  cal.output_dir = root / "calibrated";
  cli::cmd_synth(cal);
  cli::EvaluateConfig ce;
  ce.models = {{"calibrated", {{cal.output_dir / "id_test.jsonl", std::nullopt, std::nullopt}}}};
  ce.metrics = {MetricName::max_prob};
  ce.output_dir = root / "eval_cal";
  cli::cmd_evaluate(ce);
  const auto cal_doc = nlohmann::json::parse(slurp(ce.output_dir / "results.json"));
  const auto* cal_row = find_row(cal_doc, "max_prob", "id_test");
  const double ece = cal_row ? cal_row->at("values").at("ece").at("mean").get<double>() : 1.0;
  o.check(ece <= 0.02, fmt::format("calibrated ECE {:.4f}", ece));

  auto rerun = sc;
  rerun.output_dir = root / "id_ood_rerun";
  cli::cmd_synth(rerun);
  for (const char* f : {"id_test.jsonl", "ood_test.jsonl", "manifest.json"})
    o.check(slurp(sc.output_dir / f) == slurp(rerun.output_dir / f), fmt::format("synth rerun differs in {}", f));
  auto ec2 = ec;
  ec2.output_dir = root / "eval_b";
  cli::cmd_evaluate(ec2);
  o.check(slurp(ec.output_dir / "results.csv") == slurp(ec2.output_dir / "results.csv"), "evaluate rerun differs");

  fs::remove_all(root);
  if (o.pass) o.detail = fmt::format("AUROC got/manifest {}; calibrated ECE {:.4f}, reruns identical", aurocs, ece);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 metric identities", metric_identities},
      {"2 oracle equivalence", oracle_equivalence},
      {"3 calibration soundness", calibration_soundness},
      {"4 prediction-set contract", prediction_set_contract},
      {"5 ASO properties", aso_properties},
      {"6 density", density},
      {"7 sampler fidelity", sampler_fidelity},
      {"8 end-to-end", end_to_end},
  };
  int failures = 0;
  const auto start = std::chrono::steady_clock::now();
  for (const auto& [name, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = fmt::format("exception: {}", e.what());
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << fmt::format(" [{:.2f} s]", since(t0))
              << std::endl;
  }
  std::cout << fmt::format("{} / {} criteria passed in {:.1f} s", criteria.size() - failures, criteria.size(), since(start))
            << std::endl;
  return failures == 0 ? 0 : 1;
}
