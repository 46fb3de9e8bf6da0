#pragma once

#include <stdexcept>
#include <string>

namespace survbal {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public Error { using Error::Error; };
class ParseError : public Error { using Error::Error; };
class ValidationError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class DegenerateBinError : public Error { using Error::Error; };
class BudgetExceededError : public Error { using Error::Error; };
class DuplicateIdError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class TrainingError : public Error { using Error::Error; };
class DegenerateRowError : public Error { using Error::Error; };
/// Raised by exact-mode mutual information when the joint configuration
/// space is too large; callers should switch to sampled mode.
class ConfigurationOverflowError : public Error { using Error::Error; };
class SizeGuardError : public Error { using Error::Error; };
class UndefinedMetricError : public Error { using Error::Error; };

}  // namespace survbal
