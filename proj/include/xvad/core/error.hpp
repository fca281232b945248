#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace xvad {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A call violated a documented precondition (shape mismatch, bad range, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration (unknown key, out-of-range value).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem / decode / serialization failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or other numeric breakdowns.
class NumericError : public Error {
 public:
  using Error::Error;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream os;
  (os << ... << std::forward<Args>(args));
  return os.str();
}

}  // namespace detail

template <typename E = ContractError, typename... Args>
void require(bool cond, Args&&... args) {
  if (!cond) throw E(detail::concat(std::forward<Args>(args)...));
}

}  // namespace xvad
