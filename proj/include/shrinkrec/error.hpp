#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace shrinkrec {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rational literal or structured document could not be read.
class ParseError : public Error {
 public:
  using Error::Error;
};

// A map, rate or target violates its invariants.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Enumerating cylinders would exceed the configured cap.
class DepthCapExceeded : public Error {
 public:
  using Error::Error;
};

// A point was asked for symbols beyond its precision budget.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

// The exact oracle needs psi(n) to be rational.
class IrrationalRate : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

// Collects every validation failure found in a config, each prefixed by the
// key that caused it.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out = "invalid config:";
    for (const auto& p : items) {
      out += "\n  ";
      out += p;
    }
    return out;
  }

  std::vector<std::string> problems_;
};

}  // namespace shrinkrec
