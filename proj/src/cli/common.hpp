#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <json.hpp>

namespace ueval::cli::detail {

/// Parses a JSON config file; ConfigError when missing or malformed.
nlohmann::json load_config(const std::filesystem::path& path);

/// Resolves `p` against `base` unless it is absolute.
std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Writes `text` verbatim, creating parent directories.
void write_file(const std::filesystem::path& path, const std::string& text);

/// Shortest round-trip decimal form.
std::string format_number(double x);

/// Typed config lookup; ConfigError naming the key on a type mismatch.
template <typename T>
std::optional<T> get(const nlohmann::json& j, const char* key);

/// Throws ConfigError when `j` holds a key outside `allowed`.
void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const char* what);

}  // namespace ueval::cli::detail
