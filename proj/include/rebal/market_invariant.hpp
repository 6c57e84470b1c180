#pragma once

#include <utility>
#include <vector>

#include "rebal/problem.hpp"
#include "rebal/types.hpp"

namespace rebal {

/// Row/column scaling vectors behind a biproportional allocation:
/// A$ = diag(x') * M * diag(p'), with x' odot (M p') = a and
/// p' odot (M^T x') = p. The pair is determined up to the scalar trade
/// (t*x', p'/t); `normalization` records which representative is stored.
struct ScalingSolution {
  Vector x_prime;  ///< length m, proportional change per asset class
  Vector p_prime;  ///< length n, portfolio values that would put A = M
  Vector a_prime;  ///< M * p', asset totals at those portfolio values
  enum class Normalization { P1EqualsOne, P1EqualsP1, A1EqualsA1 };
  Normalization normalization = Normalization::P1EqualsOne;
};

/// Per-sweep convergence snapshot of the alternating-scaling loop.
struct IpfSweep {
  double max_gap;        ///< max |row-fitted - column-fitted| entry
  double min_row_ratio;  ///< min over i of (row sum / a_i), column-fitted state
  double max_row_ratio;
};

struct IpfTrace {
  int iterations_used = 0;
  double max_gap = 0.0;  ///< gap at termination
  double row_gap = 0.0;  ///< max |row sum - a_i| before the residual spread
  bool converged = false;
  std::vector<IpfSweep> sweeps;
};

struct IpfResult {
  AllocationResult allocation;
  ScalingSolution scaling;
  IpfTrace trace;
};

/// One closed-form root of the scaling polynomial together with the
/// allocation it induces. `nonnegative` marks the (unique) root whose
/// allocation has no negative entries.
struct AnalyticSolution {
  AllocationResult allocation;
  ScalingSolution scaling;
  double root = 0.0;  ///< the x'_1 value (or p'_1/p'_2 ratio for 2x2)
  bool nonnegative = false;
};

/// Solves the rebalancing problem by alternating row and column rescaling of
/// M * diag(p) until the row-fitted and column-fitted iterates agree to `q`
/// (absolute, in currency units; q < 0 selects 1e-9 * total, q == 0 runs a
/// fixed number of sweeps: exactly max_iter, no convergence test). The
/// remaining row residual is then spread across columns in proportion to p,
/// making both marginal sets exact. Scaling vectors are recovered from the
/// accumulated multipliers (kept in log space) and normalized to p'[0] = 1.
///
/// Zero asset rows and zero portfolio columns are stripped up front: their
/// value rows/columns are zero and the proportion columns copy the target.
/// Requires feasibility under the zero pattern; throws InfeasibleError
/// otherwise, and ConvergenceError if max_iter sweeps leave the gap above
/// 100*q (the signature of a nearly decomposable zero pattern).
IpfResult ipf_solve(const RebalanceProblem& problem, int max_iter = 10000,
                    double q = -1.0);

enum class QuadraticBranch { Positive, Negative };

/// Closed-form 2x2 solution. The scaling ratio p'_1/p'_2 solves a quadratic;
/// the positive branch gives the unique non-negative allocation, the negative
/// branch the other real solution (useful only as a reference, its allocation
/// has negative entries). Zero target entries force the allocation directly.
AnalyticSolution analytic_2x2(const RebalanceProblem& problem,
                              QuadraticBranch branch = QuadraticBranch::Positive);

/// Closed-form 2x3 solution via the cubic formula in x'_1 (with x'_2 = 1).
/// Returns every real root's solution; exactly one is flagged non-negative
/// for a feasible problem. Requires all target entries positive.
std::vector<AnalyticSolution> analytic_2x3(const RebalanceProblem& problem);

/// Closed-form 2x4 solution via the quartic formula in x'_1. Same contract
/// as analytic_2x3.
std::vector<AnalyticSolution> analytic_2x4(const RebalanceProblem& problem);

/// Swaps the roles of asset classes and portfolios: the new target is M^T
/// with each column rescaled to sum to 1 (i.e. row i of M divided by its row
/// sum), the new asset vector is p and the new portfolio vector is a.
/// Solving the transposed problem and transposing the value matrix back
/// yields the original solution. Throws on zero rows of M.
RebalanceProblem transpose_reduce(const RebalanceProblem& problem);

/// Dispatches to the closed-form solver for the supported shapes (2,2),
/// (2,3), (3,2), (2,4), (4,2), routing the transposed shapes through
/// transpose_reduce, and returns the non-negative solution.
AnalyticSolution analytic_solve(const RebalanceProblem& problem);

/// Residuals of the scaling equations: (f - a, g - p) with
/// f_i = x'_i * sum_j M_ij p'_j and g_j = p'_j * sum_i M_ij x'_i.
std::pair<Vector, Vector> equation_residuals(const RebalanceProblem& problem,
                                             const ScalingSolution& sol);

/// Information inaccuracy of the allocation relative to the target at current
/// portfolio values: sum over positive M entries of
/// A$ * log(A$ / (M * p_j)), with 0*log(0) = 0. The market-invariant
/// allocation is the unique minimizer over all allocations with the same
/// marginals and zero pattern. Throws on positive values where M is zero.
double kl_objective(const AllocationResult& result,
                    const RebalanceProblem& problem);

struct DualCertificate {
  double objective;  ///< sum lambda_i a_i + sum nu_j p_j
  Vector lambda;     ///< log(x'_i) + 1
  Vector nu;         ///< log(p'_j) - 1
};

/// Recovers the dual prices from the scaling vectors and verifies the two
/// dual feasibility families p_j e^{-nu_j} = sum_i M_ij e^{lambda_i} and
/// a_i e^{-lambda_i} = sum_j M_ij e^{nu_j} to `tol` (relative). Throws Error
/// when a family is violated, signalling an invalid scaling solution.
DualCertificate dual_objective(const RebalanceProblem& problem,
                               const ScalingSolution& sol, double tol = 1e-9);

/// Property check: scale assets by x (a -> a odot x, p_j -> sum_i A$_ij x_i),
/// re-solve, and confirm the new values equal the old ones scaled row-wise by
/// x. True means the process treated the market move as a pure repricing.
bool verify_market_invariance(const RebalanceProblem& problem, const Vector& x,
                              double q = -1.0);

}  // namespace rebal
