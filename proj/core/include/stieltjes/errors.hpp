#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stieltjes {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated an operation's precondition (a > b, step <= 0, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A time lies outside the window on which a derivator is defined.
class DomainError : public Error {
 public:
  DomainError(const std::string& what, double time) : Error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// A function produced a value that cannot be used (non-finite, log of a
/// negative number, ...). Carries the time at which it happened.
class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& what, double time) : Error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// 1 + p(t) * gap(t) <= 0 at a jump: the g-exponential is undefined.
class ResonanceError : public Error {
 public:
  ResonanceError(const std::string& what, double jumpTime) : Error(what), jumpTime_(jumpTime) {}
  double jumpTime() const noexcept { return jumpTime_; }

 private:
  double jumpTime_;
};

/// Scenario configuration is malformed. `path` names the offending key,
/// e.g. "domain.r0" or "system.continuous[1]".
class ConfigError : public Error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Expression text could not be parsed. `offset` is the byte offset into the
/// source where the problem was detected.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace stieltjes
