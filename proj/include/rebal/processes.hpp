#pragma once

#include <memory>
#include <vector>

#include "rebal/problem.hpp"
#include "rebal/types.hpp"

namespace rebal {

struct BankerConfig {
  Index banker_index = 0;       ///< 0-based portfolio index j1 (documents use 1-based)
  bool allow_negative = false;
};

/// Binary tree over an index set; every non-singleton node splits into two
/// non-empty disjoint children whose union is the parent.
struct IndexTree {
  std::vector<Index> indices;
  std::unique_ptr<IndexTree> left;
  std::unique_ptr<IndexTree> right;

  bool is_leaf() const { return !left && !right; }
};

/// A recursive grouping of asset classes and portfolios used by the grouped
/// aggregation process: at each level both index sets are halved until every
/// group is a singleton.
struct PartitionTree {
  IndexTree assets;
  IndexTree portfolios;

  /// Default builder: split each index range in half, in index order.
  static PartitionTree index_halving(Index asset_count, Index portfolio_count);

  /// Throws ValidationError if a node's children are empty, overlap, or do
  /// not cover the parent, or if a non-singleton node has no children.
  void validate(Index asset_count, Index portfolio_count) const;
};

/// Gives every portfolio except the banker its exact target column; the
/// banker column absorbs all row residuals:
/// A[i][j1] = (a_i - sum_{j != j1} M[i][j] p_j) / p_{j1}.
/// Throws BankerInfeasibleError naming the first asset class whose banker
/// entry goes negative, unless allow_negative is set.
AllocationResult banker_rebalance(const RebalanceProblem& problem,
                                  const BankerConfig& config);

/// Shifts every column by the per-asset linear overweight
/// d_i = (a_i - sum_j M[i][j] p_j) / sum_k a_k, so A[i][j] = M[i][j] + d_i.
/// Throws NegativeAllocationError listing negative entries unless allowed.
AllocationResult linear_rebalance(const RebalanceProblem& problem,
                                  bool allow_negative = false);

/// Scales each row by the proportional overweight q_i = a_i / [Mp]_i, then
/// restores column totals by rescaling every non-banker column to its p_j
/// and letting the banker column absorb the remaining row residuals.
AllocationResult proportional_then_banker(const RebalanceProblem& problem,
                                          const BankerConfig& config);

/// Approximates the market-invariant allocation by recursively aggregating
/// the problem to 2x2 (or 1xk / kx1) groups per the partition tree, solving
/// each group in closed form, and pushing the group allocations down to the
/// leaves. Marginals are exact; the result generally differs from the full
/// biproportional fit. When the target has zeros the tree must isolate them
/// (checked: a nonzero leaf value on a zero target entry is an error).
AllocationResult grouped_hybrid(const RebalanceProblem& problem,
                                const PartitionTree& tree);

struct ObjectiveKind {
  enum class Type { Banker, Linear };
  Type type = Type::Linear;
  Index banker_index = 0;  ///< used by Banker only

  static ObjectiveKind banker(Index j) { return {Type::Banker, j}; }
  static ObjectiveKind linear() { return {Type::Linear, 0}; }
};

/// Squared deviation the named process drives to zero: for the banker kind,
/// sum over non-banker columns of (A - M)^2; for the linear kind,
/// sum over all cells of (A - M - d_i)^2.
double process_objective(const AllocationResult& result,
                         const RebalanceProblem& problem,
                         const ObjectiveKind& kind);

}  // namespace rebal
