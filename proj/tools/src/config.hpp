#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace perdl_cli {

/// Configuration problems exit with code 1; anything else that fails at
/// runtime exits with 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Plain-text `key = value` configuration with `[section]` headers. Keys
/// before the first header land in the `experiment` section. `#` starts a
/// comment. Values stay strings until a typed getter parses them, so a bad
/// value reports its key and line.
class Config {
 public:
  /// Registers a key with its default value; defines the schema used by
  /// `check_known`.
  void declare(const std::string& key, const std::string& default_value);
  /// Registers a key that has no default (path-like settings).
  void declare(const std::string& key);

  void load_file(const std::string& path);
  void load_text(const std::string& text, const std::string& origin);

  /// Flag-level override; highest precedence.
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  std::string require(const std::string& key) const;
  std::string get(const std::string& key) const;

  long long get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;  // on/off, true/false, 1/0
  std::uint64_t get_u64(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;
  std::vector<std::uint64_t> get_u64_list(const std::string& key) const;

  /// Rejects any loaded key that was never declared.
  void check_known() const;

  /// Resolved view for the manifest: every declared or loaded key with its
  /// effective value, sorted.
  std::map<std::string, std::string> resolved() const;

 private:
  struct Entry {
    std::string value;
    std::string origin;  // "<default>", file path, or "<flag>"
    int line = 0;
  };
  std::map<std::string, Entry> entries_;
  std::set<std::string> known_;

  [[noreturn]] void fail(const std::string& key, const std::string& what) const;
};

}  // namespace perdl_cli
