#include "rebal/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>
#include <utility>

#include "rebal/errors.hpp"
#include "rebal/market_invariant.hpp"
#include "rebal/problem.hpp"
#include "rebal/processes.hpp"
#include "rebal/rng.hpp"

namespace rebal {

namespace {

constexpr std::uint64_t kReturnsStream = 0x72657475726e7321ULL;

// Simulated problem after optionally appending the joint shadow column.
struct TrialSetup {
  Matrix target;
  Vector start;
  std::optional<Index> shadow_column;  // set in JointParticipant mode
};

TrialSetup build_setup(const SimulationConfig& config) {
  TrialSetup setup;
  if (config.shadow_of && config.shadow_mode == ShadowMode::JointParticipant) {
    const Index n = config.target.cols();
    setup.target.resize(config.target.rows(), n + 1);
    setup.target.leftCols(n) = config.target;
    setup.target.col(n) = config.target.col(*config.shadow_of);
    setup.start.resize(n + 1);
    setup.start.head(n) = config.start_portfolios;
    setup.start(n) = config.start_portfolios(*config.shadow_of);
    setup.shadow_column = n;
  } else {
    setup.target = config.target;
    setup.start = config.start_portfolios;
  }
  return setup;
}

AllocationResult allocate(const SimulationConfig& config,
                          const RebalanceProblem& problem) {
  switch (config.process) {
    case ProcessKind::MarketInvariant: {
      const double q = config.solver_gap_rel * std::max(problem.total(), 1.0);
      return ipf_solve(problem, 10000, q).allocation;
    }
    case ProcessKind::Banker:
      return banker_rebalance(
          problem, {config.banker_index,
                    config.banker_policy == BankerPolicy::AllowNegative});
    case ProcessKind::Linear:
      // The reference experiment applies the linear shift unguarded, so
      // transient negative allocations are allowed here.
      return linear_rebalance(problem, true);
  }
  throw Error("unknown process kind");
}

}  // namespace

Matrix gen_returns(const SimulationConfig& config, std::uint64_t seed) {
  const Index m = config.target.rows();
  const int periods = config.n_periods;
  if (config.tethered && periods < 3) {
    throw std::invalid_argument(
        "tethered series need at least 3 periods (two are reserved for the "
        "tether)");
  }
  if (periods < 1) throw std::invalid_argument("n_periods must be positive");

  SplitMix64 rng(SplitMix64::derive(seed, kReturnsStream));
  Matrix gross(m, periods);
  const int drawn = config.tethered ? periods - 2 : periods;
  for (int t = 0; t < drawn; ++t) {
    for (Index i = 0; i < m; ++i) {
      gross(i, t) = std::exp((rng.next_double() - 0.5) / 2.0);
    }
  }
  if (config.tethered) {
    for (Index i = 0; i < m; ++i) {
      double product = 1.0;
      for (int t = 0; t < drawn; ++t) product *= gross(i, t);
      const double closer = std::sqrt(1.0 / product);
      gross(i, periods - 2) = closer;
      gross(i, periods - 1) = closer;
    }
  }
  return gross.array() - 1.0;
}

TrialResult run_trial(const SimulationConfig& config, const Matrix& returns) {
  const TrialSetup setup = build_setup(config);
  const Index m = setup.target.rows();
  const Index n = setup.target.cols();
  if (returns.rows() != m || returns.cols() != config.n_periods) {
    throw DimensionError("returns matrix must be m x n_periods");
  }

  const Vector start_assets = setup.target * setup.start;
  RebalanceProblem problem =
      validate_problem(setup.target, start_assets, setup.start);

  Matrix values = allocate(config, problem).values;
  Vector portfolio_values = setup.start;
  double shadow_value = 1.0;
  for (int t = 0; t < config.n_periods; ++t) {
    const Vector gross = returns.col(t).array() + 1.0;
    values = gross.asDiagonal() * values;
    portfolio_values = values.colwise().sum();
    const Vector asset_values = values.rowwise().sum();
    problem = RebalanceProblem{setup.target, asset_values, portfolio_values};
    values = allocate(config, problem).values;
    if (config.shadow_of) {
      shadow_value *= config.target.col(*config.shadow_of).dot(gross);
    }
  }

  TrialResult trial;
  trial.total_returns =
      (portfolio_values.array() / setup.start.array() - 1.0).matrix();

  const Vector mean_returns = returns.rowwise().mean();
  const double divisor = config.sample_variance
                             ? static_cast<double>(config.n_periods - 1)
                             : static_cast<double>(config.n_periods);
  Vector variances(m), performance(m);
  for (Index i = 0; i < m; ++i) {
    variances(i) =
        (returns.row(i).array() - mean_returns(i)).square().sum() / divisor;
    performance(i) = (returns.row(i).array() + 1.0).prod() - 1.0;
  }
  const double asset_total = start_assets.sum();
  trial.weighted_return = performance.dot(start_assets) / asset_total;
  trial.weighted_variance = variances.dot(start_assets) / asset_total;

  if (config.shadow_of) {
    if (setup.shadow_column) {
      trial.shadow_return = trial.total_returns(*setup.shadow_column);
    } else {
      trial.shadow_return = shadow_value - 1.0;
    }
    trial.banker_minus_shadow =
        trial.total_returns(*config.shadow_of) - trial.shadow_return;
  } else {
    trial.shadow_return = std::numeric_limits<double>::quiet_NaN();
    trial.banker_minus_shadow = std::numeric_limits<double>::quiet_NaN();
  }
  return trial;
}

StudyResult run_study(const SimulationConfig& config, int n_threads) {
  if (config.n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");
  StudyResult study;
  study.trials.resize(static_cast<std::size_t>(config.n_trials));

  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&](int begin, int end) {
    try {
      for (int k = begin; k < end; ++k) {
        const std::uint64_t trial_seed =
            SplitMix64::derive(config.seed, static_cast<std::uint64_t>(k));
        for (int attempt = 0;; ++attempt) {
          try {
            const Matrix returns = gen_returns(
                config,
                SplitMix64::derive(trial_seed,
                                   static_cast<std::uint64_t>(attempt)));
            TrialResult trial = run_trial(config, returns);
            trial.resamples = attempt;
            study.trials[static_cast<std::size_t>(k)] = std::move(trial);
            break;
          } catch (const BankerInfeasibleError&) {
            if (attempt >= config.max_resamples) {
              std::ostringstream out;
              out << "trial " << k + 1 << " stayed banker-infeasible after "
                  << config.max_resamples << " redraws";
              throw Error(out.str());
            }
          }
        }
      }
    } catch (...) {
      const std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  n_threads = std::max(1, n_threads);
  if (n_threads == 1) {
    worker(0, config.n_trials);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (config.n_trials + n_threads - 1) / n_threads;
    for (int w = 0; w < n_threads; ++w) {
      const int begin = w * chunk;
      const int end = std::min(config.n_trials, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(worker, begin, end);
    }
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (const TrialResult& trial : study.trials) {
    study.total_resamples += trial.resamples;
  }
  return study;
}

StudySummary summarize_study(const std::vector<TrialResult>& trials,
                             Index tracked_portfolio, int n_bins) {
  if (trials.empty()) throw std::invalid_argument("no trials to summarize");
  if (n_bins < 1) throw std::invalid_argument("need at least one bin");
  const Index n_portfolios = trials.front().total_returns.size();
  if (tracked_portfolio < 0 || tracked_portfolio >= n_portfolios) {
    throw std::invalid_argument("tracked portfolio out of range");
  }

  StudySummary summary;
  summary.tracked_portfolio = tracked_portfolio;
  summary.n_trials = static_cast<long>(trials.size());

  Vector sum = Vector::Zero(n_portfolios);
  Vector sum_sq = Vector::Zero(n_portfolios);
  double lo = trials.front().total_returns(tracked_portfolio);
  double hi = lo;
  long negatives = 0, with_shadow = 0;
  for (const TrialResult& trial : trials) {
    sum += trial.total_returns;
    sum_sq += trial.total_returns.cwiseAbs2();
    const double tracked = trial.total_returns(tracked_portfolio);
    lo = std::min(lo, tracked);
    hi = std::max(hi, tracked);
    summary.max_abs_return = std::max(
        summary.max_abs_return, trial.total_returns.cwiseAbs().maxCoeff());
    if (!std::isnan(trial.banker_minus_shadow)) {
      ++with_shadow;
      if (trial.banker_minus_shadow < 0.0) ++negatives;
    }
  }
  const double count = static_cast<double>(trials.size());
  summary.mean_return = sum / count;
  if (trials.size() > 1) {
    summary.sd_return = ((sum_sq - sum.cwiseAbs2() / count) / (count - 1.0))
                            .cwiseMax(0.0)
                            .cwiseSqrt();
  } else {
    summary.sd_return = Vector::Zero(n_portfolios);
  }
  summary.fraction_negative_diff =
      with_shadow > 0 ? static_cast<double>(negatives) /
                            static_cast<double>(with_shadow)
                      : 0.0;

  if (hi <= lo) {
    const double pad = std::max(std::abs(lo), 0.5) * 1e-3 + 1e-12;
    lo -= pad;
    hi += pad;
  }
  summary.bin_edges.resize(static_cast<std::size_t>(n_bins) + 1);
  for (int b = 0; b <= n_bins; ++b) {
    summary.bin_edges[static_cast<std::size_t>(b)] =
        lo + (hi - lo) * static_cast<double>(b) / n_bins;
  }
  summary.bin_counts.assign(static_cast<std::size_t>(n_bins), 0);
  for (const TrialResult& trial : trials) {
    const double x = trial.total_returns(tracked_portfolio);
    int b = static_cast<int>(static_cast<double>(n_bins) * (x - lo) / (hi - lo));
    b = std::clamp(b, 0, n_bins - 1);
    ++summary.bin_counts[static_cast<std::size_t>(b)];
  }
  return summary;
}

std::string format_summary(const StudySummary& summary) {
  std::ostringstream out;
  out << "trials: " << summary.n_trials << ", tracked portfolio: "
      << summary.tracked_portfolio + 1 << "\n";
  out << "mean return per portfolio:";
  for (Index j = 0; j < summary.mean_return.size(); ++j) {
    out << " " << summary.mean_return(j);
  }
  out << "\nsd return per portfolio:";
  for (Index j = 0; j < summary.sd_return.size(); ++j) {
    out << " " << summary.sd_return(j);
  }
  out << "\nmax |return|: " << summary.max_abs_return
      << "\nfraction of negative banker-minus-shadow: "
      << summary.fraction_negative_diff << "\nhistogram:";
  for (std::size_t b = 0; b < summary.bin_counts.size(); ++b) {
    out << " [" << summary.bin_edges[b] << "," << summary.bin_edges[b + 1]
        << "):" << summary.bin_counts[b];
  }
  out << "\n";
  return out.str();
}

PermutationCheck permutation_inequality_check(const Matrix& returns) {
  const Index m = returns.rows();
  const Index periods = returns.cols();
  if (m < 1 || m > 4 || periods < 1 || periods > 8) {
    throw std::invalid_argument(
        "brute-force check limited to m <= 4 assets and T <= 8 periods");
  }
  const Matrix gross = returns.array() + 1.0;
  for (Index i = 0; i < m; ++i) {
    const double product = gross.row(i).prod();
    if (std::abs(product - 1.0) > 1e-9) {
      std::ostringstream out;
      out << "returns are not tethered: asset " << i + 1
          << " has cumulative gross return " << product;
      throw std::invalid_argument(out.str());
    }
  }

  PermutationCheck check;
  check.min_slack = std::numeric_limits<double>::infinity();
  check.max_slack = -std::numeric_limits<double>::infinity();

  // Enumerate multisets as non-decreasing index lists; next_permutation then
  // walks exactly the distinct permutations of each.
  std::vector<int> list(static_cast<std::size_t>(periods), 0);
  for (;;) {
    std::vector<int> perm = list;
    double sum = 0.0;
    long count = 0;
    do {
      double product = 1.0;
      for (Index t = 0; t < periods; ++t) {
        product *= gross(perm[static_cast<std::size_t>(t)], t);
      }
      sum += product;
      ++count;
    } while (std::next_permutation(perm.begin(), perm.end()));
    const double slack = sum / static_cast<double>(count) - 1.0;
    check.min_slack = std::min(check.min_slack, slack);
    check.max_slack = std::max(check.max_slack, slack);

    // Advance to the next non-decreasing list.
    Index pos = periods;
    while (pos > 0 && list[static_cast<std::size_t>(pos - 1)] ==
                          static_cast<int>(m) - 1) {
      --pos;
    }
    if (pos == 0) break;
    const int next = list[static_cast<std::size_t>(pos - 1)] + 1;
    for (Index t = pos - 1; t < periods; ++t) {
      list[static_cast<std::size_t>(t)] = next;
    }
  }
  check.holds = check.min_slack >= -1e-12;
  return check;
}

}  // namespace rebal
