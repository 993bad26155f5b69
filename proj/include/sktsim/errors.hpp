#pragma once

#include <stdexcept>
#include <string>

namespace sktsim {

/// Invalid value passed to a pointwise operation (negative density, bad exponent, ...).
class DomainError : public std::invalid_argument {
public:
  explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

/// Configuration violates a model assumption or is internally inconsistent.
class ConfigRejected : public std::runtime_error {
public:
  explicit ConfigRejected(const std::string& what) : std::runtime_error(what) {}
};

/// Requested norm cannot be computed (e.g. trajectory stopped at the guard).
class NormUnavailable : public std::runtime_error {
public:
  explicit NormUnavailable(const std::string& what) : std::runtime_error(what) {}
};

/// Every path of an ensemble hit the blow-up guard.
class EnsembleDegenerate : public std::runtime_error {
public:
  explicit EnsembleDegenerate(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace sktsim
