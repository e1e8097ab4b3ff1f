#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vv {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` configuration. Lines starting with '#' are comments.
///
/// Typed getters record which keys were read so callers can reject typos with
/// `unused_keys()` once every consumer has pulled its settings.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  /// Applies a single `key=value` override (the CLI's `--set`).
  void apply_override(std::string_view assignment);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;

  std::vector<std::string> unused_keys() const;
  /// Sorted `key=value` lines; parse(dump()) reproduces the same entries.
  std::string dump() const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  const std::string* find(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
};

}  // namespace vv
