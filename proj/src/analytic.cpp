#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <deque>
#include <limits>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include "detail.hpp"
#include "rebal/market_invariant.hpp"

namespace rebal {

namespace {

using Complex = std::complex<double>;

constexpr double kRealRootImagTol = 1e-7;

Complex principal_cbrt(Complex z) { return std::pow(z, 1.0 / 3.0); }

// Roots of B1 y^3 + B2 y^2 + B3 y + B4 via the radical formula. The cube
// root argument is chosen to avoid cancellation; any nonzero choice yields
// the same root set once multiplied through the cube roots of unity.
std::array<Complex, 3> cubic_roots(double B1, double B2, double B3, double B4) {
  const double d0 = B2 * B2 - 3.0 * B1 * B3;
  const double d1 = 2.0 * B2 * B2 * B2 - 9.0 * B1 * B2 * B3 + 27.0 * B1 * B1 * B4;
  const Complex sq = std::sqrt(Complex(d1 * d1 - 4.0 * d0 * d0 * d0));
  Complex q = principal_cbrt((std::abs(d1 + sq) >= std::abs(d1 - sq))
                                 ? (d1 + sq) / 2.0
                                 : (d1 - sq) / 2.0);
  if (std::abs(q) == 0.0) {
    const Complex y(-B2 / (3.0 * B1), 0.0);  // triple root, d0 = d1 = 0
    return {y, y, y};
  }
  const Complex zeta(-0.5, std::sqrt(3.0) / 2.0);
  std::array<Complex, 3> roots;
  Complex c = q;
  for (int k = 0; k < 3; ++k) {
    roots[static_cast<std::size_t>(k)] = -(B2 + c + d0 / c) / (3.0 * B1);
    c *= zeta;
  }
  return roots;
}

// Roots of B1 y^4 + ... + B5 via the radical formula, with the resolvent
// cube root picked to keep T away from zero; the biquadratic case (linear
// depressed coefficient ~ 0) is solved directly.
std::array<Complex, 4> quartic_roots(double B1, double B2, double B3, double B4,
                                     double B5) {
  const double d0 = B3 * B3 - 3.0 * B2 * B4 + 12.0 * B1 * B5;
  const double d1 = 2.0 * B3 * B3 * B3 - 9.0 * B2 * B3 * B4 +
                    27.0 * B2 * B2 * B5 + 27.0 * B1 * B4 * B4 -
                    72.0 * B1 * B3 * B5;
  const double r = (8.0 * B1 * B3 - 3.0 * B2 * B2) / (8.0 * B1 * B1);
  const double s = (B2 * B2 * B2 - 4.0 * B1 * B2 * B3 + 8.0 * B1 * B1 * B4) /
                   (8.0 * B1 * B1 * B1);
  const double shift = -B2 / (4.0 * B1);

  const double coeff_scale = 1.0 + std::abs(r) + std::sqrt(std::abs(s));
  if (std::abs(s) <= 1e-13 * coeff_scale * coeff_scale) {
    // Depressed quartic is biquadratic: u^4 + r u^2 + c0 = 0.
    const double c0 = (-3.0 * B2 * B2 * B2 * B2 + 256.0 * B1 * B1 * B1 * B5 -
                       64.0 * B1 * B1 * B2 * B4 + 16.0 * B1 * B2 * B2 * B3) /
                      (256.0 * B1 * B1 * B1 * B1);
    const Complex inner = std::sqrt(Complex(r * r - 4.0 * c0));
    const Complex w1 = (-r + inner) / 2.0;
    const Complex w2 = (-r - inner) / 2.0;
    const Complex z1 = std::sqrt(w1);
    const Complex z2 = std::sqrt(w2);
    return {shift + z1, shift - z1, shift + z2, shift - z2};
  }

  const Complex sq = std::sqrt(Complex(d1 * d1 - 4.0 * d0 * d0 * d0));
  Complex q = principal_cbrt((std::abs(d1 + sq) >= std::abs(d1 - sq))
                                 ? (d1 + sq) / 2.0
                                 : (d1 - sq) / 2.0);
  const Complex zeta(-0.5, std::sqrt(3.0) / 2.0);
  Complex best_t(0.0, 0.0);
  if (std::abs(q) > 0.0) {
    Complex c = q;
    for (int k = 0; k < 3; ++k) {
      const Complex t =
          0.5 * std::sqrt(-2.0 / 3.0 * r + (c + d0 / c) / (3.0 * B1));
      if (std::abs(t) > std::abs(best_t)) best_t = t;
      c *= zeta;
    }
  } else {
    best_t = 0.5 * std::sqrt(Complex(-2.0 / 3.0 * r));
  }
  const Complex t = best_t;

  std::array<Complex, 4> roots;
  std::size_t idx = 0;
  for (int s1 : {-1, +1}) {
    const Complex inner = std::sqrt(-4.0 * t * t - 2.0 * r -
                                    static_cast<double>(s1) * (s / t));
    roots[idx++] = shift + static_cast<double>(s1) * t + 0.5 * inner;
    roots[idx++] = shift + static_cast<double>(s1) * t - 0.5 * inner;
  }
  return roots;
}

// Solves x'_i M_ij p'_j = values_ij for positive scalings over the bipartite
// support graph, component by component, normalizing p'[0] = 1 when
// possible. Used where the allocation was forced by zeros rather than
// produced from scaling vectors directly.
ScalingSolution recover_scaling(const RebalanceProblem& problem,
                                const Matrix& values) {
  const Index m = problem.asset_count();
  const Index n = problem.portfolio_count();
  Vector log_x = Vector::Zero(m);
  Vector log_p = Vector::Zero(n);
  std::vector<int> row_state(static_cast<std::size_t>(m), 0);
  std::vector<int> col_state(static_cast<std::size_t>(n), 0);

  for (Index j0 = 0; j0 < n; ++j0) {
    if (col_state[static_cast<std::size_t>(j0)]) continue;
    col_state[static_cast<std::size_t>(j0)] = 1;
    log_p(j0) = 0.0;
    std::deque<std::pair<bool, Index>> frontier{{false, j0}};
    while (!frontier.empty()) {
      auto [is_row, k] = frontier.front();
      frontier.pop_front();
      if (is_row) {
        for (Index j = 0; j < n; ++j) {
          if (problem.target(k, j) > 0.0 && values(k, j) > 0.0 &&
              !col_state[static_cast<std::size_t>(j)]) {
            col_state[static_cast<std::size_t>(j)] = 1;
            log_p(j) = std::log(values(k, j) / problem.target(k, j)) - log_x(k);
            frontier.emplace_back(false, j);
          }
        }
      } else {
        for (Index i = 0; i < m; ++i) {
          if (problem.target(i, k) > 0.0 && values(i, k) > 0.0 &&
              !row_state[static_cast<std::size_t>(i)]) {
            row_state[static_cast<std::size_t>(i)] = 1;
            log_x(i) = std::log(values(i, k) / problem.target(i, k)) - log_p(k);
            frontier.emplace_back(true, i);
          }
        }
      }
    }
  }

  ScalingSolution sol;
  sol.x_prime = log_x.array().exp().matrix();
  sol.p_prime = log_p.array().exp().matrix();
  const double anchor = sol.p_prime(0);
  if (anchor > 0.0 && anchor != 1.0) {
    sol.p_prime /= anchor;
    sol.x_prime *= anchor;
  }
  sol.a_prime = problem.target * sol.p_prime;
  return sol;
}

double analytic_tolerance(const RebalanceProblem& problem) {
  return 1e-9 * std::max(problem.total(), 1.0);
}

void require_positive_target(const RebalanceProblem& problem,
                             const char* where) {
  if ((problem.target.array() <= 0.0).any()) {
    std::ostringstream out;
    out << where << " requires a strictly positive target matrix";
    throw std::invalid_argument(out.str());
  }
}

// Builds the solution induced by the root y of the scaling polynomial for a
// 2 x n problem (x' = (y, 1)). Returns nullopt when a portfolio equation
// denominator vanishes, i.e. the root sits on a pole of the rational system.
std::optional<AnalyticSolution> solution_from_root(
    const RebalanceProblem& problem, double y, const std::string& tag) {
  const Index n = problem.portfolio_count();
  Vector p_prime(n);
  for (Index j = 0; j < n; ++j) {
    const double denom = problem.target(0, j) * y + problem.target(1, j);
    if (std::abs(denom) < 1e-300) return std::nullopt;
    p_prime(j) = problem.portfolios(j) / denom;
  }
  Vector x_prime(2);
  x_prime << y, 1.0;

  Matrix values(2, n);
  for (Index i = 0; i < 2; ++i) {
    for (Index j = 0; j < n; ++j) {
      values(i, j) = x_prime(i) * problem.target(i, j) * p_prime(j);
    }
  }

  AnalyticSolution sol;
  sol.root = y;
  const double dust = kNegativeDust * std::max(problem.total(), 1.0);
  sol.nonnegative = (values.array() >= -dust).all();
  sol.allocation = detail::make_result(problem, std::move(values), tag,
                                       analytic_tolerance(problem),
                                       !sol.nonnegative);
  const double anchor = p_prime(0);
  sol.scaling.p_prime = p_prime / anchor;
  sol.scaling.x_prime = x_prime * anchor;
  sol.scaling.a_prime = problem.target * sol.scaling.p_prime;
  return sol;
}

std::vector<AnalyticSolution> solutions_from_roots(
    const RebalanceProblem& problem, const std::vector<Complex>& roots,
    const std::string& tag) {
  std::vector<AnalyticSolution> out;
  for (const Complex& root : roots) {
    if (std::abs(root.imag()) > kRealRootImagTol * std::max(1.0, std::abs(root))) {
      continue;
    }
    if (auto sol = solution_from_root(problem, root.real(), tag)) {
      out.push_back(std::move(*sol));
    }
  }
  if (out.empty() ||
      std::none_of(out.begin(), out.end(),
                   [](const AnalyticSolution& s) { return s.nonnegative; })) {
    throw Error("no root yields a non-negative allocation for " + tag);
  }
  return out;
}

}  // namespace

AnalyticSolution analytic_2x2(const RebalanceProblem& problem,
                              QuadraticBranch branch) {
  if (problem.asset_count() != 2 || problem.portfolio_count() != 2) {
    throw UnsupportedShapeError("analytic_2x2 requires a 2x2 problem");
  }
  const Matrix& M = problem.target;
  const double a0 = problem.assets(0), a1 = problem.assets(1);
  const double p0 = problem.portfolios(0), p1 = problem.portfolios(1);

  if ((M.array() == 0.0).any() || !(p0 > 0.0) || !(p1 > 0.0)) {
    // A zero entry (or an empty portfolio) pins the allocation: the
    // zero-pattern-respecting fill is unique in the 2x2 case and coincides
    // with the scaling solution.
    AllocationResult fill = greedy_allocate(problem, true);
    AnalyticSolution sol;
    sol.scaling = recover_scaling(problem, fill.values);
    sol.allocation = std::move(fill);
    sol.allocation.process_tag = "analytic-2x2";
    sol.allocation.tolerance = analytic_tolerance(problem);
    sol.nonnegative = true;
    sol.root = sol.scaling.p_prime(1) > 0.0
                   ? sol.scaling.p_prime(0) / sol.scaling.p_prime(1)
                   : 0.0;
    return sol;
  }

  // Quadratic in the ratio y = p'_1 / p'_2.
  const double d = M(0, 0) * M(1, 0) * (a0 + a1) / p0;
  const double b = M(0, 0) * M(1, 1) * (a0 / p0 - a1 / p1) +
                   M(1, 0) * M(0, 1) * (a1 / p0 - a0 / p1);
  const double c = -M(0, 1) * M(1, 1) * (a0 + a1) / p1;
  const double disc = std::sqrt(b * b - 4.0 * d * c);
  const double ratio =
      (branch == QuadraticBranch::Positive ? (-b + disc) : (-b - disc)) /
      (2.0 * d);

  Vector p_prime(2);
  p_prime << ratio, 1.0;
  Vector x_prime(2);
  for (Index i = 0; i < 2; ++i) {
    x_prime(i) = problem.assets(i) / (M(i, 0) * ratio + M(i, 1));
  }
  Matrix values(2, 2);
  for (Index i = 0; i < 2; ++i) {
    for (Index j = 0; j < 2; ++j) {
      values(i, j) = x_prime(i) * M(i, j) * p_prime(j);
    }
  }

  AnalyticSolution sol;
  sol.root = ratio;
  sol.nonnegative = branch == QuadraticBranch::Positive;
  sol.allocation =
      detail::make_result(problem, std::move(values), "analytic-2x2",
                          analytic_tolerance(problem), !sol.nonnegative);
  sol.scaling.p_prime = p_prime / ratio;
  sol.scaling.x_prime = x_prime * ratio;
  sol.scaling.a_prime = M * sol.scaling.p_prime;
  return sol;
}

std::vector<AnalyticSolution> analytic_2x3(const RebalanceProblem& problem) {
  if (problem.asset_count() != 2 || problem.portfolio_count() != 3) {
    throw UnsupportedShapeError("analytic_2x3 requires a 2x3 problem");
  }
  require_positive_target(problem, "analytic_2x3");
  const Matrix& M = problem.target;
  const double a1 = problem.assets(0);
  const double a2 = problem.assets(1);
  const double p1 = problem.portfolios(0), p2 = problem.portfolios(1),
               p3 = problem.portfolios(2);

  const double B1 = M(0, 0) * M(0, 1) * M(0, 2) * a2;
  const double B2 = M(0, 0) * M(0, 1) * M(1, 2) * (p1 + p2 - a1) +
                    M(0, 0) * M(1, 1) * M(0, 2) * (p1 + p3 - a1) +
                    M(1, 0) * M(0, 1) * M(0, 2) * (p2 + p3 - a1);
  const double B3 = M(0, 0) * M(1, 1) * M(1, 2) * (p1 - a1) +
                    M(1, 0) * M(0, 1) * M(1, 2) * (p2 - a1) +
                    M(1, 0) * M(1, 1) * M(0, 2) * (p3 - a1);
  const double B4 = -a1 * M(1, 0) * M(1, 1) * M(1, 2);

  const auto roots = cubic_roots(B1, B2, B3, B4);
  return solutions_from_roots(problem, {roots.begin(), roots.end()},
                              "analytic-2x3");
}

std::vector<AnalyticSolution> analytic_2x4(const RebalanceProblem& problem) {
  if (problem.asset_count() != 2 || problem.portfolio_count() != 4) {
    throw UnsupportedShapeError("analytic_2x4 requires a 2x4 problem");
  }
  require_positive_target(problem, "analytic_2x4");
  const Matrix& M = problem.target;
  const double a1 = problem.assets(0);
  const double a2 = problem.assets(1);
  const double p1 = problem.portfolios(0), p2 = problem.portfolios(1),
               p3 = problem.portfolios(2), p4 = problem.portfolios(3);

  const double B1 = M(0, 0) * M(0, 1) * M(0, 2) * M(0, 3) * a2;
  const double B2 =
      M(0, 0) * M(0, 1) * M(0, 2) * M(1, 3) * (p1 + p2 + p3 - a1) +
      M(0, 0) * M(0, 1) * M(1, 2) * M(0, 3) * (p1 + p2 + p4 - a1) +
      M(0, 0) * M(1, 1) * M(0, 2) * M(0, 3) * (p1 + p3 + p4 - a1) +
      M(1, 0) * M(0, 1) * M(0, 2) * M(0, 3) * (p2 + p3 + p4 - a1);
  const double B3 = M(0, 0) * M(0, 1) * M(1, 2) * M(1, 3) * (p1 + p2 - a1) +
                    M(0, 0) * M(1, 1) * M(0, 2) * M(1, 3) * (p1 + p3 - a1) +
                    M(1, 0) * M(0, 1) * M(0, 2) * M(1, 3) * (p2 + p3 - a1) +
                    M(0, 0) * M(1, 1) * M(1, 2) * M(0, 3) * (p1 + p4 - a1) +
                    M(1, 0) * M(0, 1) * M(1, 2) * M(0, 3) * (p2 + p4 - a1) +
                    M(1, 0) * M(1, 1) * M(0, 2) * M(0, 3) * (p3 + p4 - a1);
  const double B4 = M(0, 0) * M(1, 1) * M(1, 2) * M(1, 3) * (p1 - a1) +
                    M(1, 0) * M(0, 1) * M(1, 2) * M(1, 3) * (p2 - a1) +
                    M(1, 0) * M(1, 1) * M(0, 2) * M(1, 3) * (p3 - a1) +
                    M(1, 0) * M(1, 1) * M(1, 2) * M(0, 3) * (p4 - a1);
  const double B5 = -a1 * M(1, 0) * M(1, 1) * M(1, 2) * M(1, 3);

  const auto roots = quartic_roots(B1, B2, B3, B4, B5);
  return solutions_from_roots(problem, {roots.begin(), roots.end()},
                              "analytic-2x4");
}

RebalanceProblem transpose_reduce(const RebalanceProblem& problem) {
  const Index m = problem.asset_count();
  const Index n = problem.portfolio_count();
  Matrix transposed(n, m);
  for (Index i = 0; i < m; ++i) {
    const double row_sum = problem.target.row(i).sum();
    if (row_sum <= 0.0) {
      std::ostringstream out;
      out << "cannot transpose: target row " << i + 1 << " is zero";
      throw Error(out.str());
    }
    transposed.col(i) = problem.target.row(i).transpose() / row_sum;
  }
  return RebalanceProblem{std::move(transposed), problem.portfolios,
                          problem.assets};
}

AnalyticSolution analytic_solve(const RebalanceProblem& problem) {
  const Index m = problem.asset_count();
  const Index n = problem.portfolio_count();
  if (m == 2 && n == 2) {
    return analytic_2x2(problem, QuadraticBranch::Positive);
  }
  if (m == 2 && (n == 3 || n == 4)) {
    auto all = (n == 3) ? analytic_2x3(problem) : analytic_2x4(problem);
    for (auto& sol : all) {
      if (sol.nonnegative) return std::move(sol);
    }
    throw Error("no non-negative analytic solution found");  // unreachable
  }
  if (n == 2 && (m == 3 || m == 4)) {
    const RebalanceProblem flipped = transpose_reduce(problem);
    AnalyticSolution t = analytic_solve(flipped);

    AnalyticSolution sol;
    sol.root = t.root;
    sol.nonnegative = t.nonnegative;
    Matrix values = t.allocation.values.transpose();
    // diag(x') M diag(p') of the transposed solution maps back with the row
    // rescaling folded into x'.
    Vector x_prime(m), p_prime(n);
    for (Index i = 0; i < m; ++i) {
      x_prime(i) = t.scaling.p_prime(i) / problem.target.row(i).sum();
    }
    for (Index j = 0; j < n; ++j) p_prime(j) = t.scaling.x_prime(j);
    const double anchor = p_prime(0);
    sol.scaling.p_prime = p_prime / anchor;
    sol.scaling.x_prime = x_prime * anchor;
    sol.scaling.a_prime = problem.target * sol.scaling.p_prime;
    sol.allocation =
        detail::make_result(problem, std::move(values), "analytic",
                            analytic_tolerance(problem), false);
    return sol;
  }
  throw UnsupportedShapeError(
      "analytic solver supports (2,2),(2,3),(3,2),(2,4),(4,2)");
}

}  // namespace rebal
