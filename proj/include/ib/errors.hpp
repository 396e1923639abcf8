#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ib {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyBlock : public Error {
 public:
  EmptyBlock() : Error("random block of dimension 0 requested") {}
};

class OutOfBox : public Error {
 public:
  using Error::Error;
};

class EmptyData : public Error {
 public:
  EmptyData() : Error("estimator applied to an empty dataset") {}
};

class DegenerateSample : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
};

class NoZFunction : public Error {
 public:
  explicit NoZFunction(const std::string& estimator)
      : Error("estimator '" + estimator + "' exposes no estimating equation") {}
};

class SingularInformation : public Error {
 public:
  using Error::Error;
};

class UnsupportedExample : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file; carries the 1-based line number of the offending line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace ib
