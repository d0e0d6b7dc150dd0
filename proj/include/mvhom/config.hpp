#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mvhom/linalg.hpp"

namespace mvhom {

/// Line-oriented experiment config:
///
///   # comment            (also ';')
///   seed = 42            top-level key
///   [integrand]          section; following keys become integrand.<key>
///   a = sine(2,1,1)
///   [recipe.step.jump.1] dotted section names are allowed
///   normal = 1
///
/// Keys are [A-Za-z0-9_.-]+, values run to the end of the line (trailing
/// comments after ' #' are stripped). Lists are comma separated; matrices
/// are rows separated by ';'. Every key must be consumed by the command.
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  int line(const std::string& key) const;
  /// Keys starting with `prefix` (sorted).
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key) const;
  long get_int(const std::string& key, long fallback) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const;
  std::vector<int> get_ints(const std::string& key, std::vector<int> fallback) const;
  Eigen::VectorXd get_vector(const std::string& key) const;
  Eigen::MatrixXd get_matrix(const std::string& key) const;

  /// Throws ConfigError naming the first (by line) key never read.
  void require_all_used() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool used = false;
  };
  const Entry& entry(const std::string& key) const;
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;

  std::map<std::string, Entry> entries_;
};

}  // namespace mvhom
