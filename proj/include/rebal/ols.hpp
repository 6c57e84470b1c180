#pragma once

#include <string>
#include <vector>

#include "rebal/types.hpp"

namespace rebal {

/// Ordinary-least-squares fit summary. Field set mirrors the usual linear
/// model printout: per-coefficient estimate / SE / t / p plus fit statistics.
struct RegressionResult {
  std::vector<std::string> term_names;  ///< "(Intercept)" first
  Vector coefficients;
  Vector standard_errors;
  Vector t_statistics;
  Vector p_values;  ///< two-sided, clamped below at 1e-300
  double r_squared = 0.0;
  double adjusted_r_squared = 0.0;
  double f_statistic = 0.0;  ///< vs the constant model
  double rmse = 0.0;         ///< residual standard error
  long n_observations = 0;

  Index coefficient(const std::string& name) const;  ///< index by term name
};

/// Fits response ~ design by ordinary least squares via the normal equations
/// (symmetric positive-definite solve). The design matrix must already
/// contain the intercept column. t-statistics are tested against Student's t
/// with n - k degrees of freedom. Throws Error on rank-deficient designs.
RegressionResult ols_regress(const Matrix& design, const Vector& response,
                             std::vector<std::string> term_names);

/// Formats the coefficient table plus fit statistics the way linear-model
/// summaries are usually printed. p-values below 1e-100 print as "<1e-100".
std::string format_regression(const RegressionResult& result);

}  // namespace rebal
