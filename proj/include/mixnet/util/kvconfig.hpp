#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixnet {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` text with `#` comments and optional `[section]` headers
/// (keys then read as `section.key`). Values may be quoted strings, numbers,
/// booleans or bracketed lists.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<long> get_int_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;

  void set(const std::string& key, const std::string& raw) { values_[key] = raw; }
  /// Copies every key of `section.` into a section-free view.
  KeyValueConfig section(const std::string& name) const;
  /// Keys of `other` override ours.
  void merge(const KeyValueConfig& other);
  const std::map<std::string, std::string>& raw() const { return values_; }
  std::string origin() const { return origin_; }

 private:
  const std::string& require(const std::string& key) const;
  std::map<std::string, std::string> values_;
  std::string origin_;
};

}  // namespace mixnet
