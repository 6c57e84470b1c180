#include "rebal/market_invariant.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "detail.hpp"

namespace rebal {

namespace {

// Indices with positive entries, and a boolean mask of the same.
std::vector<Index> positive_indices(const Vector& v) {
  std::vector<Index> kept;
  for (Index i = 0; i < v.size(); ++i) {
    if (v(i) > 0.0) kept.push_back(i);
  }
  return kept;
}

}  // namespace

IpfResult ipf_solve(const RebalanceProblem& problem, int max_iter, double q) {
  const Index m = problem.asset_count();
  const Index n = problem.portfolio_count();
  const double total = problem.total();
  // q < 0 selects the default gap; q == 0 selects the fixed-sweep mode, where
  // exactly max_iter sweeps run and stopping early or failing to converge is
  // not an error.
  const bool fixed_sweeps = (q == 0.0);
  if (q <= 0.0) q = kDefaultGapRel * std::max(total, 1.0);

  // Strip zero asset rows and zero portfolio columns; they receive zero
  // values and (for columns) target proportions.
  const std::vector<Index> rows = positive_indices(problem.assets);
  const std::vector<Index> cols = positive_indices(problem.portfolios);
  const Index mr = static_cast<Index>(rows.size());
  const Index nr = static_cast<Index>(cols.size());
  if (mr == 0 || nr == 0) {
    // Nothing to allocate; only consistent when every total is zero.
    IpfResult out;
    out.allocation = detail::make_result(problem, Matrix::Zero(m, n),
                                         "market-invariant", q, false);
    out.scaling.x_prime = Vector::Zero(m);
    out.scaling.p_prime = Vector::Zero(n);
    out.scaling.a_prime = Vector::Zero(m);
    out.trace.converged = true;
    return out;
  }

  Matrix target(mr, nr);
  Vector assets(mr), portfolios(nr);
  for (Index ir = 0; ir < mr; ++ir) assets(ir) = problem.assets(rows[ir]);
  for (Index jr = 0; jr < nr; ++jr) portfolios(jr) = problem.portfolios(cols[jr]);
  for (Index ir = 0; ir < mr; ++ir) {
    for (Index jr = 0; jr < nr; ++jr) {
      target(ir, jr) = problem.target(rows[ir], cols[jr]);
    }
  }

  {
    // Convergence needs the zero-pattern feasibility conditions; check on the
    // reduced problem (column sums there may differ from 1, which the
    // feasibility check never looks at).
    RebalanceProblem reduced{target, assets, portfolios};
    const FeasibilityReport report = check_feasibility(reduced, true);
    if (!report.feasible) {
      throw InfeasibleError("market-invariant solve impossible: " +
                            report.witness->describe());
    }
  }

  // State: the column-fitted iterate (columns sum to p exactly).
  Matrix fitted = target * portfolios.asDiagonal();
  Vector log_row_scale = Vector::Zero(mr);
  Vector log_col_scale = portfolios.array().log().matrix();

  IpfTrace trace;
  Vector row_sums(mr), row_ratios(mr);
  for (;;) {
    row_sums = fitted.rowwise().sum();
    row_ratios = assets.array() / row_sums.array();
    double gap = 0.0;
    double min_ratio = row_sums(0) / assets(0);
    double max_ratio = min_ratio;
    for (Index i = 0; i < mr; ++i) {
      const double dev = std::abs(row_ratios(i) - 1.0);
      gap = std::max(gap, fitted.row(i).maxCoeff() * dev);
      const double inv = row_sums(i) / assets(i);
      min_ratio = std::min(min_ratio, inv);
      max_ratio = std::max(max_ratio, inv);
    }
    trace.sweeps.push_back({gap, min_ratio, max_ratio});
    trace.max_gap = gap;
    if (!fixed_sweeps && gap <= q) {
      trace.converged = true;
      break;
    }
    if (trace.iterations_used >= max_iter) {
      if (!fixed_sweeps && gap > 100.0 * q) {
        std::ostringstream out;
        out << "no convergence after " << max_iter << " sweeps: gap " << gap
            << " exceeds 100x the target " << q
            << " (zero pattern is likely nearly decomposable)";
        throw ConvergenceError(out.str());
      }
      break;
    }
    // One sweep: refit rows to a, then columns to p.
    fitted = row_ratios.asDiagonal() * fitted;
    log_row_scale += row_ratios.array().log().matrix();
    const Vector col_sums = fitted.colwise().sum();
    const Vector col_ratios = (portfolios.array() / col_sums.array()).matrix();
    fitted = fitted * col_ratios.asDiagonal();
    log_col_scale += col_ratios.array().log().matrix();
    ++trace.iterations_used;
  }

  // Spread the remaining row residual across columns in proportion to p.
  // Column sums are already exact; the spread weights sum to 1 per row, so
  // rows become exact too.
  const Vector residual = assets - fitted.rowwise().sum();
  trace.row_gap = residual.cwiseAbs().maxCoeff();
  const Vector weights = portfolios / portfolios.sum();
  Matrix reduced_values = fitted + residual * weights.transpose();

  // Normalize the multipliers to p'[0] = 1.
  const double shift = log_col_scale(0);
  Vector x_reduced = (log_row_scale.array() + shift).exp().matrix();
  Vector p_reduced = (log_col_scale.array() - shift).exp().matrix();

  Matrix values = Matrix::Zero(m, n);
  Vector x_prime = Vector::Zero(m);
  Vector p_prime = Vector::Zero(n);
  for (Index ir = 0; ir < mr; ++ir) {
    x_prime(rows[ir]) = x_reduced(ir);
    for (Index jr = 0; jr < nr; ++jr) {
      values(rows[ir], cols[jr]) = reduced_values(ir, jr);
    }
  }
  for (Index jr = 0; jr < nr; ++jr) p_prime(cols[jr]) = p_reduced(jr);

  IpfResult out;
  out.allocation = detail::make_result(
      problem, std::move(values), "market-invariant",
      1e-12 * std::max(total, 1.0), false);
  out.scaling.x_prime = std::move(x_prime);
  out.scaling.p_prime = std::move(p_prime);
  out.scaling.a_prime = problem.target * out.scaling.p_prime;
  out.trace = std::move(trace);
  return out;
}

std::pair<Vector, Vector> equation_residuals(const RebalanceProblem& problem,
                                             const ScalingSolution& sol) {
  const Vector f = sol.x_prime.cwiseProduct(problem.target * sol.p_prime);
  const Vector g =
      sol.p_prime.cwiseProduct(problem.target.transpose() * sol.x_prime);
  return {f - problem.assets, g - problem.portfolios};
}

double kl_objective(const AllocationResult& result,
                    const RebalanceProblem& problem) {
  const Matrix& values = result.values;
  const Matrix& target = problem.target;
  const double dust = kNegativeDust * std::max(problem.total(), 1.0);
  double objective = 0.0;
  for (Index j = 0; j < problem.portfolio_count(); ++j) {
    const double pj = problem.portfolios(j);
    for (Index i = 0; i < problem.asset_count(); ++i) {
      if (target(i, j) > 0.0 && pj > 0.0) {
        const double v = values(i, j);
        if (v > 0.0) objective += v * std::log(v / (target(i, j) * pj));
        // v == 0 contributes 0 * log(0) = 0
      } else if (values(i, j) > dust) {
        std::ostringstream out;
        out << "allocation entry (" << i + 1 << "," << j + 1 << ") = "
            << values(i, j) << " is positive where the target is zero";
        throw Error(out.str());
      }
    }
  }
  return objective;
}

DualCertificate dual_objective(const RebalanceProblem& problem,
                               const ScalingSolution& sol, double tol) {
  const Index m = problem.asset_count();
  const Index n = problem.portfolio_count();
  for (Index i = 0; i < m; ++i) {
    if (!(sol.x_prime(i) > 0.0)) {
      throw std::invalid_argument("dual recovery requires x' > 0");
    }
  }
  for (Index j = 0; j < n; ++j) {
    if (!(sol.p_prime(j) > 0.0)) {
      throw std::invalid_argument("dual recovery requires p' > 0");
    }
  }

  DualCertificate cert;
  cert.lambda = (sol.x_prime.array().log() + 1.0).matrix();
  cert.nu = (sol.p_prime.array().log() - 1.0).matrix();
  cert.objective =
      cert.lambda.dot(problem.assets) + cert.nu.dot(problem.portfolios);

  // Feasibility families. With lambda = log x' + 1 and nu = log p' - 1 these
  // hold exactly at a solution of the scaling equations.
  const Vector exp_lambda = cert.lambda.array().exp().matrix();
  const Vector exp_nu = cert.nu.array().exp().matrix();
  for (Index j = 0; j < n; ++j) {
    const double lhs = problem.portfolios(j) * std::exp(-cert.nu(j));
    const double rhs = problem.target.col(j).dot(exp_lambda);
    if (std::abs(lhs - rhs) > tol * std::max({std::abs(lhs), std::abs(rhs), 1.0})) {
      std::ostringstream out;
      out << "dual portfolio constraint " << j + 1 << " violated: " << lhs
          << " vs " << rhs;
      throw Error(out.str());
    }
  }
  for (Index i = 0; i < m; ++i) {
    const double lhs = problem.assets(i) * std::exp(-cert.lambda(i));
    const double rhs = problem.target.row(i) * exp_nu;
    if (std::abs(lhs - rhs) > tol * std::max({std::abs(lhs), std::abs(rhs), 1.0})) {
      std::ostringstream out;
      out << "dual asset-class constraint " << i + 1 << " violated: " << lhs
          << " vs " << rhs;
      throw Error(out.str());
    }
  }
  return cert;
}

bool verify_market_invariance(const RebalanceProblem& problem, const Vector& x,
                              double q) {
  if (x.size() != problem.asset_count()) {
    throw DimensionError("market scaling vector has wrong length");
  }
  if ((x.array() <= 0.0).any()) {
    throw std::invalid_argument("market scaling vector must be positive");
  }
  const double total = problem.total();
  if (q <= 0.0) q = kDefaultGapRel * std::max(total, 1.0);

  const IpfResult base = ipf_solve(problem, 10000, q);

  const Vector scaled_assets = problem.assets.cwiseProduct(x);
  // New portfolio values: each holding repriced by its asset-class move.
  const Vector scaled_portfolios = base.allocation.values.transpose() * x;
  const RebalanceProblem scaled{problem.target, scaled_assets,
                                scaled_portfolios};

  const double ratio = scaled_assets.sum() / total;
  const IpfResult moved = ipf_solve(scaled, 10000, q * ratio);

  const Matrix expected =
      x.asDiagonal() * base.allocation.values;  // row-wise repricing
  const double tol = 10.0 * q * ratio;
  return ((moved.allocation.values - expected).cwiseAbs().maxCoeff() <= tol);
}

}  // namespace rebal
