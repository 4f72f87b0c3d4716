#include <fmt/format.h>
#include <sstream>

#include "common.hpp"
#include "ueval/cli.hpp"
#include "ueval/error.hpp"

namespace ueval::cli {

namespace {

using nlohmann::ordered_json;

std::string table_csv(const FrequencyTable& t, const char* key) {
  std::string out = fmt::format("{},source,sample\n", key);
  for (std::size_t i = 0; i < t.keys.size(); ++i) {
    std::string k = t.keys[i];
    if (k.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char ch : k) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      k = quoted + "\"";
    }
    out += fmt::format("{},{},{}\n", k, detail::format_number(t.freq_a[i]), detail::format_number(t.freq_b[i]));
  }
  return out;
}

}  // namespace

SubsampleResult cmd_subsample(const SubsampleConfig& config) {
  if (config.corpus.empty()) throw ConfigError("subsample: no corpus given");
  if (config.top_k == 0) throw ConfigError("subsample: top_k must be >= 1");
  const Corpus corpus = load_corpus(config.corpus);
  if (config.task && *config.task != corpus.task)
    throw DataError(fmt::format("subsample: corpus '{}' is a {} corpus, not {}", config.corpus.string(),
                                to_string(corpus.task), to_string(*config.task)));
  SamplePlan plan{config.target_size, config.seed, corpus.task};

  SubsampleResult res;
  res.indices = select(corpus, plan);
  std::vector<CorpusRecord> sample;
  sample.reserve(res.indices.size());
  for (auto i : res.indices) sample.push_back(corpus.records[i]);
  res.comparison = compare_distributions(corpus.records, sample, config.top_k);
  res.source_sha256 = detail::sha256_file(config.corpus);

  std::ostringstream body;
  write_corpus(body, sample, corpus.task);
  detail::write_file(config.output_dir / "subsample.jsonl", body.str());

  ordered_json manifest;
  manifest["source"] = config.corpus.filename().string();
  manifest["source_sha256"] = res.source_sha256;
  manifest["source_size"] = corpus.records.size();
  manifest["task"] = to_string(corpus.task);
  manifest["seed"] = config.seed;
  manifest["target_size"] = config.target_size;
  manifest["indices"] = res.indices;
  detail::write_file(config.output_dir / "subsample.manifest.json", manifest.dump(2) + "\n");

  const auto& c = res.comparison;
  ordered_json cmp;
  cmp["a"] = "source";
  cmp["b"] = "sample";
  cmp["top_k"] = c.top_k;
  cmp["length_js"] = c.length_js;
  cmp["label_js"] = c.label_js;
  cmp["top_type_js"] = c.top_type_js;
  detail::write_file(config.output_dir / "comparison.json", cmp.dump(2) + "\n");
  detail::write_file(config.output_dir / "comparison_lengths.csv", table_csv(c.lengths, "length"));
  detail::write_file(config.output_dir / "comparison_labels.csv", table_csv(c.labels, "label"));
  detail::write_file(config.output_dir / "comparison_types.csv", table_csv(c.types, "type"));
  return res;
}

}  // namespace ueval::cli
