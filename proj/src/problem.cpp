#include "rebal/problem.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "detail.hpp"
#include "maxflow.hpp"
#include "rebal/rng.hpp"

namespace rebal {

namespace {

std::string format_indices(const std::vector<Index>& indices) {
  std::ostringstream out;
  out << "{";
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (k) out << ",";
    out << indices[k] + 1;  // 1-based in messages
  }
  out << "}";
  return out.str();
}

}  // namespace

std::string FeasibilityWitness::describe() const {
  std::ostringstream out;
  if (side == Side::PortfolioSubset) {
    out << "portfolio subset J=" << format_indices(subset) << " requires "
        << required << " but only " << available
        << " is reachable through positive target entries";
  } else {
    out << "asset-class subset I=" << format_indices(subset) << " holds "
        << required << " but only " << available
        << " of portfolio capacity is reachable through positive target entries";
  }
  return out.str();
}

RebalanceProblem validate_problem(const Matrix& target, const Vector& assets,
                                  const Vector& portfolios, double eps_col,
                                  double eps_tot) {
  const Index m = target.rows();
  const Index n = target.cols();
  if (m == 0 || n == 0) {
    throw DimensionError("target matrix must be non-empty");
  }
  if (assets.size() != m || portfolios.size() != n) {
    std::ostringstream out;
    out << "dimension mismatch: target is " << m << "x" << n << ", |a|="
        << assets.size() << ", |p|=" << portfolios.size();
    throw DimensionError(out.str());
  }
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < m; ++i) {
      if (target(i, j) < 0.0) {
        std::ostringstream out;
        out << "target entry (" << i + 1 << "," << j + 1 << ") is negative: "
            << target(i, j);
        throw NegativeEntryError(out.str());
      }
    }
  }
  for (Index i = 0; i < m; ++i) {
    if (assets(i) < 0.0) {
      std::ostringstream out;
      out << "asset-class total " << i + 1 << " is negative: " << assets(i);
      throw NegativeEntryError(out.str());
    }
  }
  for (Index j = 0; j < n; ++j) {
    if (portfolios(j) < 0.0) {
      std::ostringstream out;
      out << "portfolio total " << j + 1 << " is negative: " << portfolios(j);
      throw NegativeEntryError(out.str());
    }
  }
  for (Index j = 0; j < n; ++j) {
    const double col_sum = target.col(j).sum();
    if (std::abs(col_sum - 1.0) > eps_col) {
      std::ostringstream out;
      out << "target column " << j + 1 << " sums to " << col_sum
          << " (tolerance " << eps_col << ")";
      throw ColumnSumError(out.str());
    }
  }
  const double asset_total = assets.sum();
  const double portfolio_total = portfolios.sum();
  if (std::abs(asset_total - portfolio_total) > eps_tot * std::max(asset_total, 1.0)) {
    std::ostringstream out;
    out << "asset total " << asset_total << " does not match portfolio total "
        << portfolio_total;
    throw TotalMismatchError(out.str());
  }
  return RebalanceProblem{target, assets, portfolios};
}

FeasibilityReport check_feasibility(const RebalanceProblem& problem,
                                    bool enforce_zero_pattern) {
  FeasibilityReport report;
  report.zero_pattern_enforced = enforce_zero_pattern;
  if (!enforce_zero_pattern) {
    return report;  // always feasible without the zero-pattern constraint
  }

  const Index m = problem.asset_count();
  const Index n = problem.portfolio_count();
  const double total = problem.total();
  const double eps = 1e-14 * std::max(total, 1.0);

  // Nodes: 0 = source, 1..m assets, m+1..m+n portfolios, m+n+1 = sink.
  detail::MaxFlow flow(static_cast<int>(m + n) + 2);
  const int source = 0;
  const int sink = static_cast<int>(m + n) + 1;
  for (Index i = 0; i < m; ++i) {
    flow.add_edge(source, static_cast<int>(i) + 1, problem.assets(i));
  }
  for (Index j = 0; j < n; ++j) {
    flow.add_edge(static_cast<int>(m + j) + 1, sink, problem.portfolios(j));
  }
  const double inf_cap = 2.0 * std::max(total, 1.0);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (problem.target(i, j) > 0.0) {
        flow.add_edge(static_cast<int>(i) + 1, static_cast<int>(m + j) + 1,
                      inf_cap);
      }
    }
  }

  const double value = flow.solve(source, sink, eps);
  const double slack = kDefaultGapRel * std::max(total, 1.0);
  if (value >= total - slack) {
    return report;
  }

  report.feasible = false;
  const std::vector<bool> reachable = flow.min_cut_side(source, eps);

  // Portfolios outside the source side of the cut are the underserved set J;
  // the assets they can draw on are exactly the unreachable assets.
  FeasibilityWitness witness;
  witness.side = FeasibilityWitness::Side::PortfolioSubset;
  double required = 0.0;
  for (Index j = 0; j < n; ++j) {
    if (!reachable[static_cast<std::size_t>(m + j) + 1]) {
      witness.subset.push_back(j);
      required += problem.portfolios(j);
    }
  }
  std::vector<bool> in_union(static_cast<std::size_t>(m), false);
  for (Index j : witness.subset) {
    for (Index i = 0; i < m; ++i) {
      if (problem.target(i, j) > 0.0) in_union[static_cast<std::size_t>(i)] = true;
    }
  }
  double available = 0.0;
  for (Index i = 0; i < m; ++i) {
    if (in_union[static_cast<std::size_t>(i)]) available += problem.assets(i);
  }
  witness.required = required;
  witness.available = available;

  if (available >= required) {
    // Fall back to the transposed condition: assets on the source side of the
    // cut exceed the portfolio capacity they can reach.
    witness = FeasibilityWitness{};
    witness.side = FeasibilityWitness::Side::AssetSubset;
    double held = 0.0;
    for (Index i = 0; i < m; ++i) {
      if (reachable[static_cast<std::size_t>(i) + 1]) {
        witness.subset.push_back(i);
        held += problem.assets(i);
      }
    }
    std::vector<bool> cap_union(static_cast<std::size_t>(n), false);
    for (Index i : witness.subset) {
      for (Index j = 0; j < n; ++j) {
        if (problem.target(i, j) > 0.0) cap_union[static_cast<std::size_t>(j)] = true;
      }
    }
    double capacity = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (cap_union[static_cast<std::size_t>(j)]) capacity += problem.portfolios(j);
    }
    witness.required = held;
    witness.available = capacity;
  }
  report.witness = std::move(witness);
  return report;
}

AllocationResult greedy_allocate(const RebalanceProblem& problem,
                                 bool enforce_zero_pattern) {
  const FeasibilityReport report =
      check_feasibility(problem, enforce_zero_pattern);
  if (!report.feasible) {
    throw InfeasibleError("greedy allocation impossible: " +
                          report.witness->describe());
  }

  const Index m = problem.asset_count();
  const Index n = problem.portfolio_count();
  Matrix values = Matrix::Zero(m, n);
  Vector row_left = problem.assets;
  Vector col_left = problem.portfolios;
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < m; ++i) {
      if (enforce_zero_pattern && problem.target(i, j) == 0.0) continue;
      const double amount = std::min(row_left(i), col_left(j));
      if (amount <= 0.0) continue;
      values(i, j) = amount;
      row_left(i) -= amount;
      col_left(j) -= amount;
    }
  }

  if (enforce_zero_pattern) {
    // The in-order fill can strand money behind the zero pattern (a cell
    // greedily takes value a later portfolio could only have drawn through
    // it). Feasibility guarantees an allocation exists, so redistribute the
    // leftovers along augmenting paths: forward over allowed cells, backward
    // over already-filled ones.
    const double eps = 1e-14 * std::max(problem.total(), 1.0);
    for (Index start = 0; start < m; ++start) {
      while (row_left(start) > eps) {
        std::vector<Index> via_cell(static_cast<std::size_t>(n), -1);
        std::vector<Index> via_col(static_cast<std::size_t>(m), -1);
        std::vector<bool> row_seen(static_cast<std::size_t>(m), false);
        std::vector<Index> frontier{start};
        row_seen[static_cast<std::size_t>(start)] = true;
        Index open_col = -1;
        while (!frontier.empty() && open_col < 0) {
          const Index i = frontier.back();
          frontier.pop_back();
          for (Index j = 0; j < n && open_col < 0; ++j) {
            if (problem.target(i, j) == 0.0 ||
                via_cell[static_cast<std::size_t>(j)] >= 0) {
              continue;
            }
            via_cell[static_cast<std::size_t>(j)] = i;
            if (col_left(j) > eps) {
              open_col = j;
              break;
            }
            for (Index i2 = 0; i2 < m; ++i2) {
              if (!row_seen[static_cast<std::size_t>(i2)] &&
                  values(i2, j) > eps) {
                row_seen[static_cast<std::size_t>(i2)] = true;
                via_col[static_cast<std::size_t>(i2)] = j;
                frontier.push_back(i2);
              }
            }
          }
        }
        if (open_col < 0) {
          throw InfeasibleError(
              "greedy allocation stalled despite the feasibility check");
        }
        // Bottleneck along the alternating path back to `start`.
        double push = std::min(row_left(start), col_left(open_col));
        for (Index j = open_col;;) {
          const Index i = via_cell[static_cast<std::size_t>(j)];
          if (i == start) break;
          j = via_col[static_cast<std::size_t>(i)];
          push = std::min(push, values(i, j));
        }
        for (Index j = open_col;;) {
          const Index i = via_cell[static_cast<std::size_t>(j)];
          values(i, j) += push;
          if (i == start) break;
          j = via_col[static_cast<std::size_t>(i)];
          values(i, j) -= push;
        }
        row_left(start) -= push;
        col_left(open_col) -= push;
      }
    }
  }
  return detail::make_result(problem, std::move(values), "greedy",
                             1e-12 * std::max(problem.total(), 1.0), false);
}

Matrix proportions_from_values(const Matrix& values, const Vector& portfolios,
                               const Matrix& target) {
  const Index m = values.rows();
  const Index n = values.cols();
  if (portfolios.size() != n || target.rows() != m || target.cols() != n) {
    throw DimensionError("proportions_from_values: inconsistent dimensions");
  }
  const double guard = 1e-7 * (portfolios.cwiseAbs().sum() + 1.0);
  Matrix proportions(m, n);
  for (Index j = 0; j < n; ++j) {
    if (portfolios(j) > 0.0) {
      if (std::abs(values.col(j).sum() - portfolios(j)) > guard) {
        std::ostringstream out;
        out << "value column " << j + 1 << " sums to " << values.col(j).sum()
            << ", expected " << portfolios(j);
        throw std::invalid_argument(out.str());
      }
      proportions.col(j) = values.col(j) / portfolios(j);
    } else {
      proportions.col(j) = target.col(j);
    }
  }
  return proportions;
}

AllocationResult perturb_allocation(const AllocationResult& result,
                                    double alpha, std::uint64_t seed) {
  if (alpha < 0.0 || alpha > 1.0) {
    throw std::invalid_argument("perturbation alpha must lie in [0, 1]");
  }
  if (alpha == 0.0) return result;
  const Matrix& values = result.values;
  const Index m = values.rows();
  const Index n = values.cols();

  double min_positive = 0.0;
  Index nonzero_rows = 0, nonzero_cols = 0;
  {
    std::vector<bool> row_has(static_cast<std::size_t>(m), false);
    std::vector<bool> col_has(static_cast<std::size_t>(n), false);
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < m; ++i) {
        if (values(i, j) > 0.0) {
          row_has[static_cast<std::size_t>(i)] = true;
          col_has[static_cast<std::size_t>(j)] = true;
          if (min_positive == 0.0 || values(i, j) < min_positive) {
            min_positive = values(i, j);
          }
        }
      }
    }
    nonzero_rows = static_cast<Index>(std::count(row_has.begin(), row_has.end(), true));
    nonzero_cols = static_cast<Index>(std::count(col_has.begin(), col_has.end(), true));
  }
  if (nonzero_rows < 2 || nonzero_cols < 2) {
    throw PerturbationError(
        "allocation has fewer than two nonzero rows or columns; no "
        "zero-marginal disturbance exists");
  }

  // Build E as a sum of four-cell rectangle patterns +d/-d/-d/+d, each of
  // which has zero row and column sums and lives on the positive support.
  SplitMix64 rng(SplitMix64::derive(seed, 0x7065727475726221ULL));
  Matrix disturbance = Matrix::Zero(m, n);
  const int wanted = std::max<int>(64, static_cast<int>(4 * m * n));
  int built = 0;
  for (int attempt = 0; attempt < 50 * wanted && built < wanted; ++attempt) {
    const Index i1 = static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(m)));
    Index i2 = static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(m)));
    if (i1 == i2) continue;
    std::vector<Index> shared;
    for (Index j = 0; j < n; ++j) {
      if (values(i1, j) > 0.0 && values(i2, j) > 0.0) shared.push_back(j);
    }
    if (shared.size() < 2) continue;
    const Index j1 = shared[rng.next_below(shared.size())];
    Index j2 = shared[rng.next_below(shared.size())];
    if (j1 == j2) continue;
    const double d = rng.next_double(-1.0, 1.0);
    disturbance(i1, j1) += d;
    disturbance(i1, j2) -= d;
    disturbance(i2, j1) -= d;
    disturbance(i2, j2) += d;
    ++built;
  }
  const double peak = disturbance.cwiseAbs().maxCoeff();
  if (built == 0 || peak == 0.0) {
    throw PerturbationError(
        "allocation support contains no rectangle of positive entries; no "
        "zero-marginal disturbance exists");
  }
  disturbance /= peak;

  AllocationResult out = result;
  out.values = values + alpha * min_positive * disturbance;
  out.process_tag = result.process_tag + "+perturbed";
  // Residuals are unchanged up to rounding; recompute them against the same
  // marginals the input achieved.
  const Vector row_targets = values.rowwise().sum();
  const Vector col_targets = values.colwise().sum();
  out.residual_row = (out.values.rowwise().sum() - row_targets).cwiseAbs();
  out.residual_col = (out.values.colwise().sum().transpose() - col_targets).cwiseAbs();
  for (Index j = 0; j < n; ++j) {
    const double total = col_targets(j);
    if (total > 0.0) out.proportions.col(j) = out.values.col(j) / total;
  }
  return out;
}

namespace detail {

AllocationResult make_result(const RebalanceProblem& problem, Matrix values,
                             std::string tag, double tolerance,
                             bool allow_negative) {
  AllocationResult result;
  result.proportions =
      proportions_from_values(values, problem.portfolios, problem.target);
  result.values = std::move(values);
  result.process_tag = std::move(tag);
  result.tolerance = tolerance;
  result.allow_negative = allow_negative;
  result.residual_row =
      (result.values.rowwise().sum() - problem.assets).cwiseAbs();
  result.residual_col =
      (result.values.colwise().sum().transpose() - problem.portfolios).cwiseAbs();
  return result;
}

}  // namespace detail

}  // namespace rebal
