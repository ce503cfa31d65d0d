#pragma once

#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace gpe {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses the TOML subset used by experiment configs into a JSON object:
/// `key = value` lines, `[table]` and `[table.sub]` headers, `#` comments,
/// and values that are double-quoted strings, integers, floats, booleans, or
/// single-line arrays of those. Duplicate keys are rejected.
nlohmann::json parse_config_text(const std::string& text);
nlohmann::json parse_config_file(const std::filesystem::path& path);

/// Typed access to one config table that remembers which keys were read, so
/// leftover (unknown) keys can be rejected.
class ConfigTable {
 public:
  ConfigTable(const nlohmann::json& table, std::string path);

  bool has(const std::string& key) const;
  const std::string& path() const { return path_; }

  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<int> get_ints(const std::string& key, const std::vector<int>& fallback) const;
  /// Raw value (for keys accepting more than one type).
  const nlohmann::json& get_raw(const std::string& key) const;
  ConfigTable table(const std::string& key) const;
  /// Empty table when the key is absent.
  ConfigTable table_or_empty(const std::string& key) const;

  /// Throws ConfigError naming every key that was never read.
  void finish() const;

 private:
  const nlohmann::json& at(const std::string& key) const;
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;

  nlohmann::json table_;
  std::string path_;
  mutable std::set<std::string> used_;
};

}  // namespace gpe
