#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ddfl/errors.hpp"

namespace ddfl {

// Flat `[section]` / `key = value` configuration file. Values are scalars or
// space-separated lists; `#` starts a comment. Keys are addressed as
// "section.key".
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_list(const std::string& key) const;
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::string origin_;
};

}  // namespace ddfl
