#pragma once

#include <Eigen/Dense>
#include <string>

namespace rebal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Default relative tolerance for target-matrix column sums.
inline constexpr double kColumnSumTol = 1e-9;
/// Default relative tolerance for the asset-total vs portfolio-total match.
inline constexpr double kTotalTol = 1e-9;
/// Default iterative-solver gap, relative to the problem total.
inline constexpr double kDefaultGapRel = 1e-9;
/// Entries below -kNegativeDust * total are treated as genuinely negative;
/// anything closer to zero is floating-point dust.
inline constexpr double kNegativeDust = 1e-12;

/// A rebalancing problem (M, a, p): column-stochastic target matrix M with
/// asset classes as rows and portfolios as columns, asset-class totals a and
/// portfolio totals p with matching grand totals.
struct RebalanceProblem {
  Matrix target;      ///< M, m x n, each column sums to 1
  Vector assets;      ///< a, length m, currency units
  Vector portfolios;  ///< p, length n, currency units

  Index asset_count() const { return target.rows(); }
  Index portfolio_count() const { return target.cols(); }
  double total() const { return assets.sum(); }
};

/// Output of a rebalancing process: the allocation both as column proportions
/// (A) and as currency values (A$ = A * diag(p)), plus the achieved marginal
/// residuals and the tolerance the producing process promises for them.
struct AllocationResult {
  Matrix proportions;        ///< A, columns sum to 1
  Matrix values;             ///< A$, rows sum to a, columns sum to p
  std::string process_tag;   ///< identifier of the producing process
  Vector residual_row;       ///< |row sums of A$ - a|
  Vector residual_col;       ///< |column sums of A$ - p|
  double tolerance = 0.0;    ///< declared bound on the residuals (absolute)
  bool allow_negative = false;

  double max_row_residual() const {
    return residual_row.size() ? residual_row.maxCoeff() : 0.0;
  }
  double max_col_residual() const {
    return residual_col.size() ? residual_col.maxCoeff() : 0.0;
  }
};

}  // namespace rebal
