#include <fstream>
#include <istream>
#include <ostream>
#include <fmt/format.h>
#include <json.hpp>

#include "ueval/error.hpp"
#include "ueval/sampler.hpp"

namespace ueval {

namespace {

using nlohmann::json;

CorpusRecord parse_corpus_line(const std::string& line, std::size_t line_no, bool& token_task) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_no, fmt::format("malformed JSON: {}", e.what()));
  }
  if (!j.is_object()) throw ParseError(line_no, "corpus line is not a JSON object");
  CorpusRecord r;
  r.source = line;
  try {
    if (!j.contains("tokens")) throw ParseError(line_no, "missing 'tokens'");
    r.tokens = j.at("tokens").get<std::vector<std::string>>();
    const bool has_label = j.contains("label");
    const bool has_labels = j.contains("labels");
    if (has_label == has_labels) throw ParseError(line_no, "need exactly one of 'label' or 'labels'");
    token_task = has_labels;
    if (has_label)
      r.labels = {j.at("label").get<int>()};
    else
      r.labels = j.at("labels").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw ParseError(line_no, fmt::format("bad field type: {}", e.what()));
  }
  if (r.tokens.empty()) throw ParseError(line_no, "sequence has no tokens");
  if (token_task && r.labels.size() != r.tokens.size())
    throw ParseError(line_no, fmt::format("{} labels for {} tokens", r.labels.size(), r.tokens.size()));
  for (int l : r.labels)
    if (l < 0) throw ParseError(line_no, fmt::format("negative label {}", l));
  return r;
}

}  // namespace

Corpus read_corpus(std::istream& in) {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line.back() == '\r') line.pop_back();
    bool token_task = false;
    auto r = parse_corpus_line(line, line_no, token_task);
    const auto task = token_task ? CorpusTask::token_cls : CorpusTask::sequence_cls;
    if (first) {
      corpus.task = task;
      first = false;
    } else if (task != corpus.task) {
      throw ParseError(line_no, "corpus mixes 'label' and 'labels' records");
    }
    corpus.records.push_back(std::move(r));
  }
  if (corpus.records.empty()) throw DataError("corpus is empty");
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open corpus '{}'", path.string()));
  try {
    return read_corpus(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string(), e);
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_corpus(std::ostream& out, std::span<const CorpusRecord> records, CorpusTask task) {
  for (const auto& r : records) {
    if (!r.source.empty()) {
      out << r.source << '\n';
      continue;
    }
    json j;
    j["tokens"] = r.tokens;
    if (task == CorpusTask::sequence_cls)
      j["label"] = r.labels.empty() ? 0 : r.labels.front();
    else
      j["labels"] = r.labels;
    out << j.dump() << '\n';
  }
}

}  // namespace ueval
