#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rebal/errors.hpp"
#include "rebal/types.hpp"

namespace rebal {

/// Outcome of a feasibility check. When the problem is infeasible under the
/// zero-pattern constraint, `witness` names a violated marginal subset: a set
/// of portfolios whose combined totals exceed the assets reachable through
/// positive target entries, or the transposed condition on asset classes.
struct FeasibilityWitness {
  enum class Side { PortfolioSubset, AssetSubset };
  Side side;
  std::vector<Index> subset;  ///< 0-based indices into p (or a for AssetSubset)
  double required;            ///< total the subset demands
  double available;           ///< total reachable through the zero pattern

  std::string describe() const;
};

struct FeasibilityReport {
  bool feasible = true;
  bool zero_pattern_enforced = false;
  std::optional<FeasibilityWitness> witness;
};

/// Checks (M, a, p) against the problem invariants and returns it unchanged.
/// Nothing is normalized; each violated rule raises its own error type:
/// DimensionError, NegativeEntryError, ColumnSumError, TotalMismatchError.
RebalanceProblem validate_problem(const Matrix& target, const Vector& assets,
                                  const Vector& portfolios,
                                  double eps_col = kColumnSumTol,
                                  double eps_tot = kTotalTol);

/// Decides whether an allocation exists. Without the zero-pattern constraint
/// every valid problem is feasible. With it, feasibility is decided by a
/// maximum-flow computation on the bipartite graph of positive target
/// entries; an infeasible report carries a min-cut witness subset.
FeasibilityReport check_feasibility(const RebalanceProblem& problem,
                                    bool enforce_zero_pattern);

/// Allocates by repeatedly giving each cell the largest amount both its row
/// and column budgets allow, filling column by column (row index moving
/// fastest). Ignores the target entirely except, when the flag is set, to
/// force zeros where the target is zero. Marginals are met exactly.
AllocationResult greedy_allocate(const RebalanceProblem& problem,
                                 bool enforce_zero_pattern = false);

/// Converts a value allocation to column proportions: column j of A is
/// A$ column j divided by p[j]; columns with p[j] = 0 copy the target column.
/// The caller must pass value columns that already sum to p.
Matrix proportions_from_values(const Matrix& values, const Vector& portfolios,
                               const Matrix& target);

/// Adds a random zero-marginal disturbance: A$ + alpha * b * E, where E has
/// entries in [-1, 1], zero row and column sums, zeros wherever A$ has zeros,
/// and b is the smallest positive entry of A$. Marginals and non-negativity
/// are preserved for any alpha in [0, 1]. Throws PerturbationError when the
/// support admits no such E (fewer than two nonzero rows or columns, or no
/// four-cell rectangle of positive entries).
AllocationResult perturb_allocation(const AllocationResult& result,
                                    double alpha, std::uint64_t seed);

}  // namespace rebal
