#include "ueval/dump_io.hpp"

#include <fstream>
#include <istream>
#include <fmt/format.h>
#include <json.hpp>

#include "ueval/error.hpp"

namespace ueval {

namespace {

using json = nlohmann::json;

struct LineContext {
  std::size_t line;
  std::string id;

  [[noreturn]] void fail(const std::string& what) const {
    if (id.empty()) throw ParseError(line, what);
    throw ParseError(line, fmt::format("record '{}': {}", id, what));
  }
};

double number_at(const json& v, const LineContext& ctx, const char* field) {
  if (!v.is_number()) ctx.fail(fmt::format("'{}' must contain numbers", field));
  return v.get<double>();
}

void read_tensor3(const json& v, const LineContext& ctx, const char* field, PredictionRecord& r) {
  if (!v.is_array() || v.empty()) ctx.fail(fmt::format("'{}' must be a non-empty S x T x K array", field));
  r.samples = v.size();
  for (std::size_t s = 0; s < v.size(); ++s) {
    const auto& steps = v[s];
    if (!steps.is_array() || steps.empty()) ctx.fail(fmt::format("'{}'[{}] must be a non-empty T x K array", field, s));
    if (s == 0) r.steps = steps.size();
    if (steps.size() != r.steps)
      ctx.fail(fmt::format("'{}' sample {} has {} steps, expected {}", field, s, steps.size(), r.steps));
    for (std::size_t t = 0; t < steps.size(); ++t) {
      const auto& row = steps[t];
      if (!row.is_array()) ctx.fail(fmt::format("'{}'[{}][{}] must be an array", field, s, t));
      if (s == 0 && t == 0) {
        r.classes = row.size();
        r.values.reserve(r.samples * r.steps * r.classes);
      }
      if (row.size() != r.classes)
        ctx.fail(fmt::format("'{}' sample {} step {} has {} classes, expected {}", field, s, t,
                             row.size(), r.classes));
      for (const auto& x : row) r.values.push_back(number_at(x, ctx, field));
    }
  }
}

}  // namespace

PredictionRecord parse_record(const std::string& line, std::size_t line_no) {
  LineContext ctx{line_no, {}};
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    ctx.fail(fmt::format("invalid JSON ({})", e.what()));
  }
  if (!doc.is_object()) ctx.fail("record must be a JSON object");

  PredictionRecord r;
  auto id = doc.find("id");
  if (id == doc.end() || !id->is_string()) ctx.fail("missing string field 'id'");
  r.id = id->get<std::string>();
  ctx.id = r.id;

  auto split = doc.find("split");
  if (split == doc.end() || !split->is_string()) ctx.fail("missing string field 'split'");
  try {
    r.split = parse_split(split->get<std::string>());
  } catch (const DataError& e) {
    ctx.fail(e.what());
  }

  auto logits = doc.find("logits");
  auto probs = doc.find("probs");
  if (logits != doc.end()) {
    r.kind = ScoreKind::logits;
    read_tensor3(*logits, ctx, "logits", r);
  } else if (probs != doc.end()) {
    r.kind = ScoreKind::probabilities;
    read_tensor3(*probs, ctx, "probs", r);
  } else {
    ctx.fail("missing field 'logits'");
  }

  auto gold = doc.find("gold");
  if (gold == doc.end() || gold->is_null()) {
    r.labeled = false;
  } else {
    if (!gold->is_array()) ctx.fail("'gold' must be an array of integers");
    for (const auto& g : *gold) {
      if (!g.is_number_integer()) ctx.fail("'gold' must contain integers");
      r.gold.push_back(g.get<int>());
    }
  }

  if (auto mask = doc.find("mask"); mask != doc.end() && !mask->is_null()) {
    if (!mask->is_array()) ctx.fail("'mask' must be an array of booleans");
    for (const auto& m : *mask) {
      if (!m.is_boolean()) ctx.fail("'mask' must contain booleans");
      r.mask.push_back(m.get<bool>());
    }
    if (r.mask.empty()) ctx.fail("'mask' must not be empty");
  }

  if (auto feats = doc.find("features"); feats != doc.end() && !feats->is_null()) {
    if (!feats->is_array()) ctx.fail("'features' must be a T x D array");
    if (feats->size() != r.steps)
      ctx.fail(fmt::format("'features' has {} rows, expected {}", feats->size(), r.steps));
    for (std::size_t t = 0; t < feats->size(); ++t) {
      const auto& row = (*feats)[t];
      if (!row.is_array()) ctx.fail("'features' rows must be arrays");
      if (t == 0) r.feature_dim = row.size();
      if (row.size() != r.feature_dim)
        ctx.fail(fmt::format("'features' row {} has {} entries, expected {}", t, row.size(),
                             r.feature_dim));
      for (const auto& x : row) r.features.push_back(number_at(x, ctx, "features"));
    }
  }

  try {
    finalize_record(r);
  } catch (const DataError& e) {
    throw ParseError(line_no, e.what());
  }
  return r;
}

Dataset read_dump(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ds.records.push_back(parse_record(line, line_no));
  }
  finalize_dataset(ds);
  return ds;
}

Dataset load_dump(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open dump '{}'", path.string()));
  try {
    return read_dump(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string(), e);
  }
}

std::string serialize_record(const PredictionRecord& r) {
  json doc = json::object();
  doc["id"] = r.id;
  doc["split"] = std::string(to_string(r.split));
  json tensor = json::array();
  for (std::size_t s = 0; s < r.samples; ++s) {
    json steps = json::array();
    for (std::size_t t = 0; t < r.steps; ++t) {
      auto row = r.scores(s, t);
      steps.push_back(json(std::vector<double>(row.begin(), row.end())));
    }
    tensor.push_back(std::move(steps));
  }
  doc[r.has_logits() ? "logits" : "probs"] = std::move(tensor);
  if (r.labeled)
    doc["gold"] = r.gold;
  else
    doc["gold"] = nullptr;
  bool explicit_mask = false;
  for (std::size_t t = 0; t < r.steps; ++t)
    explicit_mask = explicit_mask || (!r.mask[t] && (!r.labeled || r.gold[t] != kIgnoreLabel));
  if (explicit_mask) {
    json mask = json::array();
    for (bool m : r.mask) mask.push_back(m);
    doc["mask"] = std::move(mask);
  }
  if (r.has_features()) {
    json feats = json::array();
    for (std::size_t t = 0; t < r.steps; ++t) {
      auto row = r.step_features(t);
      feats.push_back(json(std::vector<double>(row.begin(), row.end())));
    }
    doc["features"] = std::move(feats);
  }
  return doc.dump();
}

void write_dump(std::ostream& out, const Dataset& ds) {
  for (const auto& r : ds.records) out << serialize_record(r) << '\n';
}

void save_dump(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write dump '{}'", path.string()));
  write_dump(out, ds);
}

}  // namespace ueval
