#include "ddfl/config.hpp"

#include <fstream>
#include <sstream>

namespace ddfl {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), path);
}

Config Config::parse_string(const std::string& text, const std::string& origin) {
  Config cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (cfg.values_.count(full))
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + full + "'");
    cfg.values_[full] = value;
  }
  return cfg;
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Config::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(origin_ + ": missing required key '" + key + "'");
  return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": key '" + key + "' is not a number: '" + v + "'");
  }
}

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

int Config::get_int(const std::string& key) const {
  const double d = get_double(key);
  const int i = static_cast<int>(d);
  if (static_cast<double>(i) != d) throw ConfigError(origin_ + ": key '" + key + "' is not an integer");
  return i;
}

int Config::get_int(const std::string& key, int fallback) const { return has(key) ? get_int(key) : fallback; }

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get_string(key);
  try {
    std::size_t pos = 0;
    const unsigned long long u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": key '" + key + "' is not an unsigned integer: '" + v + "'");
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get_string(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(origin_ + ": key '" + key + "' is not a boolean: '" + v + "'");
}

std::vector<double> Config::get_list(const std::string& key) const {
  const std::string v = get_string(key);
  std::istringstream ss(v);
  std::vector<double> out;
  std::string tok;
  while (ss >> tok) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError(origin_ + ": key '" + key + "' has a non-numeric list entry '" + tok + "'");
    }
  }
  if (out.empty()) throw ConfigError(origin_ + ": key '" + key + "' is an empty list");
  return out;
}

std::vector<double> Config::get_list(const std::string& key, const std::vector<double>& fallback) const {
  return has(key) ? get_list(key) : fallback;
}

}  // namespace ddfl
