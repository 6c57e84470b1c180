#include "rebal/processes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

#include "detail.hpp"
#include "rebal/market_invariant.hpp"

namespace rebal {

namespace {

AllocationResult result_with_proportions(const RebalanceProblem& problem,
                                         Matrix proportions, Matrix values,
                                         std::string tag, double tolerance,
                                         bool allow_negative) {
  AllocationResult result;
  result.proportions = std::move(proportions);
  result.values = std::move(values);
  result.process_tag = std::move(tag);
  result.tolerance = tolerance;
  result.allow_negative = allow_negative;
  result.residual_row =
      (result.values.rowwise().sum() - problem.assets).cwiseAbs();
  result.residual_col =
      (result.values.colwise().sum().transpose() - problem.portfolios)
          .cwiseAbs();
  return result;
}

void check_banker_column(const Matrix& values, Index banker, double total,
                         bool allow_negative, const char* process) {
  if (allow_negative) return;
  const double dust = kNegativeDust * std::max(total, 1.0);
  for (Index i = 0; i < values.rows(); ++i) {
    if (values(i, banker) < -dust) {
      std::ostringstream out;
      out << process << " infeasible: asset class " << i + 1
          << " leaves the banker portfolio " << banker + 1
          << " short by " << -values(i, banker);
      throw BankerInfeasibleError(out.str(), i);
    }
  }
}

}  // namespace

AllocationResult banker_rebalance(const RebalanceProblem& problem,
                                  const BankerConfig& config) {
  const Index m = problem.asset_count();
  const Index n = problem.portfolio_count();
  const Index j1 = config.banker_index;
  if (j1 < 0 || j1 >= n) {
    throw std::invalid_argument("banker index out of range");
  }
  // The value-side construction only divides by p[j1] to express
  // proportions, so a signed banker total is representable when negative
  // allocations are allowed.
  if (config.allow_negative ? problem.portfolios(j1) == 0.0
                            : !(problem.portfolios(j1) > 0.0)) {
    throw std::invalid_argument("banker portfolio must have positive value");
  }

  Matrix proportions = problem.target;
  for (Index i = 0; i < m; ++i) {
    double other = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (j != j1) other += problem.target(i, j) * problem.portfolios(j);
    }
    proportions(i, j1) = (problem.assets(i) - other) / problem.portfolios(j1);
  }
  Matrix values = proportions * problem.portfolios.asDiagonal();
  check_banker_column(values, j1, problem.total(), config.allow_negative,
                      "banker process");
  return result_with_proportions(problem, std::move(proportions),
                                 std::move(values), "banker",
                                 1e-12 * std::max(problem.total(), 1.0),
                                 config.allow_negative);
}

AllocationResult linear_rebalance(const RebalanceProblem& problem,
                                  bool allow_negative) {
  const Index m = problem.asset_count();
  const Index n = problem.portfolio_count();
  const double total = problem.total();
  const Vector at_target = problem.target * problem.portfolios;
  const Vector overweight = (problem.assets - at_target) / total;

  Matrix proportions = problem.target;
  proportions.colwise() += overweight;
  Matrix values = proportions * problem.portfolios.asDiagonal();

  if (!allow_negative) {
    const double dust = kNegativeDust * std::max(total, 1.0);
    std::vector<std::pair<Index, Index>> negatives;
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < m; ++i) {
        if (values(i, j) < -dust) negatives.emplace_back(i, j);
      }
    }
    if (!negatives.empty()) {
      std::ostringstream out;
      out << "linear process drives " << negatives.size()
          << " allocation entr" << (negatives.size() == 1 ? "y" : "ies")
          << " negative, first at asset class " << negatives.front().first + 1
          << ", portfolio " << negatives.front().second + 1;
      throw NegativeAllocationError(out.str(), std::move(negatives));
    }
  }
  return result_with_proportions(problem, std::move(proportions),
                                 std::move(values), "linear",
                                 1e-12 * std::max(total, 1.0), allow_negative);
}

AllocationResult proportional_then_banker(const RebalanceProblem& problem,
                                          const BankerConfig& config) {
  const Index m = problem.asset_count();
  const Index n = problem.portfolio_count();
  const Index j1 = config.banker_index;
  if (j1 < 0 || j1 >= n) {
    throw std::invalid_argument("banker index out of range");
  }
  if (!(problem.portfolios(j1) > 0.0)) {
    throw std::invalid_argument("banker portfolio must have positive value");
  }
  const double total = problem.total();

  const Vector at_target = problem.target * problem.portfolios;
  Vector ratio(m);
  for (Index i = 0; i < m; ++i) {
    if (at_target(i) > 0.0) {
      ratio(i) = problem.assets(i) / at_target(i);
    } else if (problem.assets(i) == 0.0) {
      ratio(i) = 0.0;
    } else {
      std::ostringstream out;
      out << "asset class " << i + 1
          << " holds value but has zero target exposure";
      throw InfeasibleError(out.str());
    }
  }

  Matrix values(m, n);
  for (Index j = 0; j < n; ++j) {
    values.col(j) = ratio.cwiseProduct(problem.target.col(j)) *
                    problem.portfolios(j);
  }
  // Restore the non-banker column totals, then hand the row residuals to the
  // banker.
  for (Index j = 0; j < n; ++j) {
    if (j == j1) continue;
    const double col_sum = values.col(j).sum();
    if (problem.portfolios(j) == 0.0) {
      values.col(j).setZero();
    } else if (col_sum > 0.0) {
      values.col(j) *= problem.portfolios(j) / col_sum;
    } else {
      std::ostringstream out;
      out << "portfolio " << j + 1
          << " cannot be rescaled: its proportional allocation is zero";
      throw InfeasibleError(out.str());
    }
  }
  values.col(j1) = problem.assets;
  for (Index j = 0; j < n; ++j) {
    if (j != j1) values.col(j1) -= values.col(j);
  }
  check_banker_column(values, j1, total, config.allow_negative,
                      "proportional-then-banker process");
  return detail::make_result(problem, std::move(values), "proportional-banker",
                             1e-9 * std::max(total, 1.0),
                             config.allow_negative);
}

// ---------------------------------------------------------------------------
// Grouped aggregation process
// ---------------------------------------------------------------------------

namespace {

IndexTree build_halving_tree(std::vector<Index> indices) {
  IndexTree node;
  node.indices = std::move(indices);
  if (node.indices.size() >= 2) {
    const std::size_t half = node.indices.size() / 2;
    node.left = std::make_unique<IndexTree>(build_halving_tree(
        {node.indices.begin(), node.indices.begin() + static_cast<long>(half)}));
    node.right = std::make_unique<IndexTree>(build_halving_tree(
        {node.indices.begin() + static_cast<long>(half), node.indices.end()}));
  }
  return node;
}

void validate_tree(const IndexTree& node, Index bound) {
  if (node.indices.empty()) {
    throw ValidationError("partition node has an empty index set");
  }
  for (Index idx : node.indices) {
    if (idx < 0 || idx >= bound) {
      throw ValidationError("partition node index out of range");
    }
  }
  if (node.indices.size() == 1) return;
  if (!node.left || !node.right) {
    throw ValidationError(
        "non-singleton partition node must split into two children");
  }
  std::vector<Index> merged = node.left->indices;
  merged.insert(merged.end(), node.right->indices.begin(),
                node.right->indices.end());
  std::vector<Index> expected = node.indices;
  std::sort(merged.begin(), merged.end());
  std::sort(expected.begin(), expected.end());
  if (merged != expected ||
      std::adjacent_find(merged.begin(), merged.end()) != merged.end()) {
    throw ValidationError(
        "partition children must be disjoint and cover the parent");
  }
  validate_tree(*node.left, bound);
  validate_tree(*node.right, bound);
}

// Recursive block allocator. `asset_values` / `portfolio_values` are
// full-length vectors, valid only at this block's indices.
void allocate_block(const Matrix& target, const IndexTree& asset_node,
                    const IndexTree& portfolio_node, const Vector& asset_values,
                    const Vector& portfolio_values, Matrix& out) {
  const auto& I = asset_node.indices;
  const auto& J = portfolio_node.indices;

  if (I.size() == 1) {
    // Single asset group: each portfolio draws its whole block value from it.
    for (Index j : J) out(I[0], j) += portfolio_values(j);
    return;
  }
  if (J.size() == 1) {
    for (Index i : I) out(i, J[0]) += asset_values(i);
    return;
  }

  const IndexTree* asset_children[2] = {asset_node.left.get(),
                                        asset_node.right.get()};
  const IndexTree* portfolio_children[2] = {portfolio_node.left.get(),
                                            portfolio_node.right.get()};

  Matrix aggregated(2, 2);
  Vector group_assets(2), group_portfolios(2);
  for (int l = 0; l < 2; ++l) {
    double p_hat = 0.0;
    for (Index j : portfolio_children[l]->indices) p_hat += portfolio_values(j);
    group_portfolios(l) = p_hat;
    for (int k = 0; k < 2; ++k) {
      double weighted = 0.0;
      for (Index i : asset_children[k]->indices) {
        for (Index j : portfolio_children[l]->indices) {
          weighted += target(i, j) * portfolio_values(j);
        }
      }
      aggregated(k, l) = p_hat > 0.0 ? weighted / p_hat : 0.5;
    }
  }
  for (int k = 0; k < 2; ++k) {
    double a_hat = 0.0;
    for (Index i : asset_children[k]->indices) a_hat += asset_values(i);
    group_assets(k) = a_hat;
  }

  AnalyticSolution grouped;
  try {
    grouped = analytic_2x2(
        RebalanceProblem{aggregated, group_assets, group_portfolios});
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(std::string("infeasible aggregate group: ") +
                          e.what());
  }
  const Matrix& flows = grouped.allocation.values;  // 2x2 group flows

  for (int k = 0; k < 2; ++k) {
    // Row share of group k's assets that goes to portfolio group l.
    for (int l = 0; l < 2; ++l) {
      const double col_share =
          group_portfolios(l) > 0.0 ? flows(k, l) / group_portfolios(l) : 0.0;
      const double row_share =
          group_assets(k) > 0.0 ? flows(k, l) / group_assets(k) : 0.0;
      Vector child_portfolios = Vector::Zero(portfolio_values.size());
      for (Index j : portfolio_children[l]->indices) {
        child_portfolios(j) = col_share * portfolio_values(j);
      }
      Vector child_assets = Vector::Zero(asset_values.size());
      for (Index i : asset_children[k]->indices) {
        child_assets(i) = row_share * asset_values(i);
      }
      allocate_block(target, *asset_children[k], *portfolio_children[l],
                     child_assets, child_portfolios, out);
    }
  }
}

}  // namespace

PartitionTree PartitionTree::index_halving(Index asset_count,
                                           Index portfolio_count) {
  std::vector<Index> asset_ids(static_cast<std::size_t>(asset_count));
  std::iota(asset_ids.begin(), asset_ids.end(), Index{0});
  std::vector<Index> portfolio_ids(static_cast<std::size_t>(portfolio_count));
  std::iota(portfolio_ids.begin(), portfolio_ids.end(), Index{0});
  PartitionTree tree;
  tree.assets = build_halving_tree(std::move(asset_ids));
  tree.portfolios = build_halving_tree(std::move(portfolio_ids));
  return tree;
}

void PartitionTree::validate(Index asset_count, Index portfolio_count) const {
  validate_tree(assets, asset_count);
  validate_tree(portfolios, portfolio_count);
  if (static_cast<Index>(assets.indices.size()) != asset_count ||
      static_cast<Index>(portfolios.indices.size()) != portfolio_count) {
    throw ValidationError("partition tree roots must cover all indices");
  }
}

AllocationResult grouped_hybrid(const RebalanceProblem& problem,
                                const PartitionTree& tree) {
  tree.validate(problem.asset_count(), problem.portfolio_count());
  const FeasibilityReport report = check_feasibility(problem, true);
  if (!report.feasible) {
    throw InfeasibleError("grouped allocation impossible: " +
                          report.witness->describe());
  }

  Matrix values =
      Matrix::Zero(problem.asset_count(), problem.portfolio_count());
  allocate_block(problem.target, tree.assets, tree.portfolios, problem.assets,
                 problem.portfolios, values);

  const double dust = kNegativeDust * std::max(problem.total(), 1.0);
  for (Index j = 0; j < problem.portfolio_count(); ++j) {
    for (Index i = 0; i < problem.asset_count(); ++i) {
      if (problem.target(i, j) == 0.0 && std::abs(values(i, j)) > dust) {
        std::ostringstream out;
        out << "partition tree does not isolate the zeros of the target: "
            << "leaf (" << i + 1 << "," << j + 1 << ") received "
            << values(i, j);
        throw Error(out.str());
      }
    }
  }
  return detail::make_result(problem, std::move(values), "grouped-hybrid",
                             1e-9 * std::max(problem.total(), 1.0), false);
}

double process_objective(const AllocationResult& result,
                         const RebalanceProblem& problem,
                         const ObjectiveKind& kind) {
  const Matrix& A = result.proportions;
  const Matrix& M = problem.target;
  double objective = 0.0;
  if (kind.type == ObjectiveKind::Type::Banker) {
    for (Index j = 0; j < M.cols(); ++j) {
      if (j == kind.banker_index) continue;
      objective += (A.col(j) - M.col(j)).squaredNorm();
    }
  } else {
    const Vector overweight =
        (problem.assets - M * problem.portfolios) / problem.total();
    for (Index j = 0; j < M.cols(); ++j) {
      objective += (A.col(j) - M.col(j) - overweight).squaredNorm();
    }
  }
  return objective;
}

}  // namespace rebal
