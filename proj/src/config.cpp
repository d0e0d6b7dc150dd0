#include "mvhom/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mvhom/errors.hpp"

namespace mvhom {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  if (k.empty() || k.front() == '.' || k.back() == '.') return false;
  return std::all_of(k.begin(), k.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
  });
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

bool to_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(s.c_str(), &end);
  return errno == 0 && end == s.c_str() + s.size() && std::isfinite(out);
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream is(text);
  std::string raw;
  std::string section;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line, lineno, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_key(section)) throw ConfigError(section, lineno, "invalid section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line, lineno, "expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = line.substr(eq + 1);
    if (const auto hash = value.find(" #"); hash != std::string::npos) value.resize(hash);
    value = trim(value);
    if (!valid_key(key)) throw ConfigError(key, lineno, "invalid key");
    if (!section.empty()) key = section + "." + key;
    if (value.empty()) throw ConfigError(key, lineno, "empty value");
    if (cfg.entries_.count(key)) throw ConfigError(key, lineno, "duplicate key");
    cfg.entries_[key] = Entry{value, lineno};
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

bool Config::has(const std::string& key) const { return entries_.count(key) > 0; }

int Config::line(const std::string& key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? 0 : it->second.line;
}

std::vector<std::string> Config::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, e] : entries_) {
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  }
  return out;
}

const Config::Entry& Config::entry(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError(key, 0, "missing required key");
  it->second.used = true;
  return it->second;
}

void Config::fail(const std::string& key, const std::string& what) const {
  throw ConfigError(key, line(key), what);
}

std::string Config::get_string(const std::string& key) const { return entry(key).value; }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}

double Config::get_double(const std::string& key) const {
  double v = 0.0;
  if (!to_double(entry(key).value, v)) fail(key, "expected a number");
  return v;
}

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

long Config::get_int(const std::string& key) const {
  const std::string& s = entry(key).value;
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (errno != 0 || end != s.c_str() + s.size()) fail(key, "expected an integer");
  return v;
}

long Config::get_int(const std::string& key, long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::uint64_t Config::get_u64(const std::string& key) const {
  const std::string& s = entry(key).value;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (errno != 0 || s.empty() || s[0] == '-' || end != s.c_str() + s.size()) {
    fail(key, "expected an unsigned 64-bit integer");
  }
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string& s = entry(key).value;
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  fail(key, "expected true or false");
}

std::vector<double> Config::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split(entry(key).value, ',')) {
    double v = 0.0;
    if (!to_double(item, v)) fail(key, "expected a comma separated list of numbers");
    out.push_back(v);
  }
  return out;
}

std::vector<double> Config::get_doubles(const std::string& key,
                                        std::vector<double> fallback) const {
  return has(key) ? get_doubles(key) : fallback;
}

std::vector<int> Config::get_ints(const std::string& key, std::vector<int> fallback) const {
  if (!has(key)) return fallback;
  std::vector<int> out;
  for (double v : get_doubles(key)) {
    if (v != std::floor(v) || std::abs(v) > 1e9) fail(key, "expected integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

Eigen::VectorXd Config::get_vector(const std::string& key) const {
  const auto v = get_doubles(key);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
}

Eigen::MatrixXd Config::get_matrix(const std::string& key) const {
  const auto rows = split(entry(key).value, ';');
  std::vector<std::vector<double>> data;
  for (const auto& r : rows) {
    std::vector<double> row;
    for (const auto& item : split(r, ',')) {
      double v = 0.0;
      if (!to_double(item, v)) fail(key, "expected rows of numbers separated by ';'");
      row.push_back(v);
    }
    if (!data.empty() && row.size() != data.front().size()) fail(key, "ragged matrix rows");
    data.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<long>(data.size()), static_cast<long>(data.front().size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < data[i].size(); ++j) m(i, j) = data[i][j];
  }
  return m;
}

void Config::require_all_used() const {
  const Entry* first = nullptr;
  std::string name;
  for (const auto& [k, e] : entries_) {
    if (!e.used && (!first || e.line < first->line)) {
      first = &e;
      name = k;
    }
  }
  if (first) throw ConfigError(name, first->line, "unknown key");
}

}  // namespace mvhom
