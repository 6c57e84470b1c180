#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace rebal {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Problem fails structural validation. Subclasses identify which rule broke.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NegativeEntryError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ColumnSumError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class TotalMismatchError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A problem (or a derived sub-problem) admits no allocation under the
/// requested constraints. Maps to exit code 2 at the command line.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// The banker column would go negative for some asset class.
class BankerInfeasibleError : public InfeasibleError {
 public:
  BankerInfeasibleError(const std::string& msg, Eigen::Index asset_class)
      : InfeasibleError(msg), asset_class(asset_class) {}
  Eigen::Index asset_class;  ///< 0-based; messages print it 1-based
};

/// A process produced negative entries and the caller did not allow them.
class NegativeAllocationError : public Error {
 public:
  NegativeAllocationError(const std::string& msg,
                          std::vector<std::pair<Eigen::Index, Eigen::Index>> entries)
      : Error(msg), entries(std::move(entries)) {}
  std::vector<std::pair<Eigen::Index, Eigen::Index>> entries;  ///< 0-based (i, j)
};

/// The allocation admits no marginal-preserving perturbation.
class PerturbationError : public Error {
 public:
  using Error::Error;
};

/// Iterative solve exhausted its iteration budget far from the target gap.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Operation does not support the problem shape (e.g. analytic 3x3).
class UnsupportedShapeError : public Error {
 public:
  using Error::Error;
};

/// File parse / serialization failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rebal
