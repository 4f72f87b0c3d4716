#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "ueval/core.hpp"

namespace ueval {

// Prediction dumps are JSON Lines, one record per line:
//   {"id": str, "split": "train"|"id_test"|"ood_test",
//    "logits": [S][T][K] numbers, "gold": [T] ints,
//    "mask": [T] bools (optional), "features": [T][D] numbers (optional)}
// A probability-only dump carries "probs" with the same shape instead of "logits".
// Unknown keys are ignored; blank lines are skipped.

/// Parses one JSON line. `line_no` is only used in error messages.
PredictionRecord parse_record(const std::string& line, std::size_t line_no);

Dataset read_dump(std::istream& in);
Dataset load_dump(const std::filesystem::path& path);

/// Compact one-line JSON encoding of a record (no trailing newline).
/// The mask is written only where it differs from the ignore-label derivation.
std::string serialize_record(const PredictionRecord& record);

void write_dump(std::ostream& out, const Dataset& dataset);
void save_dump(const std::filesystem::path& path, const Dataset& dataset);

}  // namespace ueval
