#pragma once

#include <stdexcept>
#include <string>

namespace mvhom {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// dist(p, M) is not below the tube radius, so the projection is undefined.
class OutOfTube : public Error {
 public:
  using Error::Error;
};

class ScheduleTooShort : public Error {
 public:
  using Error::Error;
};

class InvalidRecipe : public Error {
 public:
  InvalidRecipe(const std::string& constraint)
      : Error("invalid recipe: " + constraint), constraint_(constraint) {}
  const std::string& constraint() const { return constraint_; }

 private:
  std::string constraint_;
};

class EvaluatorDomain : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, int line, const std::string& what)
      : Error("config error at line " + std::to_string(line) + " [" + key + "]: " + what),
        key_(key),
        line_(line) {}
  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  std::string key_;
  int line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class KindMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace mvhom
