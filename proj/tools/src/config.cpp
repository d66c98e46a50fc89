#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace perdl_cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

void Config::declare(const std::string& key, const std::string& default_value) {
  known_.insert(key);
  entries_[key] = {default_value, "<default>", 0};
}

void Config::declare(const std::string& key) { known_.insert(key); }

void Config::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::string section = "experiment";
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    entries_[section + "." + key] = {value, origin, lineno};
  }
}

void Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  load_text(buffer.str(), path);
}

void Config::set(const std::string& key, const std::string& value) {
  entries_[key] = {value, "<flag>", 0};
}

bool Config::has(const std::string& key) const {
  auto it = entries_.find(key);
  return it != entries_.end() && !it->second.value.empty();
}

void Config::fail(const std::string& key, const std::string& what) const {
  auto it = entries_.find(key);
  std::string where;
  if (it != entries_.end() && it->second.line > 0) {
    where = " (" + it->second.origin + ":" + std::to_string(it->second.line) + ")";
  }
  throw ConfigError(key + ": " + what + where);
}

std::string Config::require(const std::string& key) const {
  if (!has(key)) fail(key, "required setting is missing");
  return entries_.at(key).value;
}

std::string Config::get(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? "" : it->second.value;
}

long long Config::get_int(const std::string& key) const {
  const std::string v = require(key);
  try {
    std::size_t used = 0;
    long long parsed = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return parsed;
  } catch (const std::exception&) {
    fail(key, "expected an integer, got '" + v + "'");
  }
}

double Config::get_double(const std::string& key) const {
  const std::string v = require(key);
  try {
    std::size_t used = 0;
    double parsed = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return parsed;
  } catch (const std::exception&) {
    fail(key, "expected a number, got '" + v + "'");
  }
}

bool Config::get_bool(const std::string& key) const {
  std::string v = require(key);
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  fail(key, "expected on/off, got '" + v + "'");
}

std::uint64_t Config::get_u64(const std::string& key) const {
  const std::string v = require(key);
  try {
    std::size_t used = 0;
    std::uint64_t parsed = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return parsed;
  } catch (const std::exception&) {
    fail(key, "expected a nonnegative integer, got '" + v + "'");
  }
}

std::vector<std::string> Config::get_list(const std::string& key) const {
  std::vector<std::string> out;
  if (!has(key)) return out;
  std::istringstream in(entries_.at(key).value);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::uint64_t> Config::get_u64_list(const std::string& key) const {
  std::vector<std::uint64_t> out;
  for (const auto& item : get_list(key)) {
    try {
      out.push_back(std::stoull(item));
    } catch (const std::exception&) {
      fail(key, "expected a comma-separated list of integers, got '" + item + "'");
    }
  }
  return out;
}

void Config::check_known() const {
  for (const auto& [key, entry] : entries_) {
    if (known_.find(key) == known_.end()) {
      std::string where;
      if (entry.line > 0) {
        where = " (" + entry.origin + ":" + std::to_string(entry.line) + ")";
      }
      throw ConfigError("unknown config key '" + key + "'" + where);
    }
  }
}

std::map<std::string, std::string> Config::resolved() const {
  std::map<std::string, std::string> out;
  for (const auto& [key, entry] : entries_) out[key] = entry.value;
  return out;
}

}  // namespace perdl_cli
