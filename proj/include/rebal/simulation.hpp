#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rebal/types.hpp"

namespace rebal {

enum class ProcessKind { MarketInvariant, Banker, Linear };

/// How the shadow comparison portfolio is simulated. CompoundAtTarget grows
/// an off-to-the-side value at the shadowed portfolio's target weights each
/// period; JointParticipant appends it to the problem as an extra portfolio
/// column (duplicating the shadowed target column) that rebalances with
/// everyone else.
enum class ShadowMode { CompoundAtTarget, JointParticipant };

/// What to do when the banker column would go negative mid-trial.
/// AllowNegative carries the signed allocation forward (the banker simply
/// owes the others); Resample discards the trial and redraws its returns.
/// AllowNegative is the default: the comparison statistics match the
/// reference experiment this way, and the disadvantaging result survives
/// unchanged because non-banker portfolios still hold their exact targets.
enum class BankerPolicy { AllowNegative, Resample };

struct SimulationConfig {
  Matrix target;            ///< m x n target matrix, columns sum to 1
  Vector start_portfolios;  ///< length n, currency
  int n_periods = 30;
  int n_trials = 10000;
  bool tethered = true;     ///< force per-asset cumulative gross return to 1
  ProcessKind process = ProcessKind::MarketInvariant;
  Index banker_index = 0;   ///< 0-based; used by the banker process
  BankerPolicy banker_policy = BankerPolicy::AllowNegative;
  std::optional<Index> shadow_of;  ///< portfolio whose target the shadow copies
  ShadowMode shadow_mode = ShadowMode::CompoundAtTarget;
  std::uint64_t seed = 0;
  /// Gap tolerance for the market-invariant solves, relative to the fund
  /// total. Tight by default so per-period allocation error stays far below
  /// the return magnitudes under test.
  double solver_gap_rel = 1e-13;
  bool sample_variance = false;  ///< divide return variance by T-1 instead of T
  int max_resamples = 100;       ///< per-trial retries after banker infeasibility
};

struct TrialResult {
  Vector total_returns;          ///< per portfolio: p_j^T / p_j^0 - 1
  /// Start-value-weighted per-asset total return over the horizon (the
  /// per-asset performance measure the comparison regressions use).
  double weighted_return = 0.0;
  /// Start-value-weighted variance of the per-period returns.
  double weighted_variance = 0.0;
  double shadow_return = 0.0;
  double banker_minus_shadow = 0.0;  ///< NaN when no shadow is configured
  int resamples = 0;
};

struct StudyResult {
  std::vector<TrialResult> trials;
  long total_resamples = 0;
};

struct StudySummary {
  Index tracked_portfolio = 0;
  long n_trials = 0;
  std::vector<double> bin_edges;   ///< histogram of the tracked returns
  std::vector<long> bin_counts;
  Vector mean_return;              ///< per portfolio
  Vector sd_return;
  double max_abs_return = 0.0;
  double fraction_negative_diff = 0.0;  ///< share of banker_minus_shadow < 0
};

/// Draws the m x n_periods matrix of per-period net returns. Gross returns
/// are exp((U - 0.5) / 2) with U uniform on (0, 1). When tethered, the final
/// two periods both equal the square root of the inverse cumulative product,
/// pinning every asset's total gross return to exactly 1.
Matrix gen_returns(const SimulationConfig& config, std::uint64_t seed);

/// One full rebalance-and-return pass: allocate, apply the period's asset
/// returns to the value matrix, recompute totals, reallocate, and so on for
/// every period. Returns per-portfolio total returns plus the weighted
/// return/variance statistics of the input series. Throws
/// BankerInfeasibleError when the banker column goes negative mid-trial
/// under BankerPolicy::Resample.
TrialResult run_trial(const SimulationConfig& config, const Matrix& returns);

/// Runs n_trials independent trials on per-trial derived seeds. Under
/// BankerPolicy::Resample, trials that abort on banker infeasibility are
/// redrawn from a fresh derived seed (and counted). Results are
/// deterministic functions of config.seed regardless of the number of
/// worker threads.
StudyResult run_study(const SimulationConfig& config, int n_threads = 1);

/// Histogram, moments and sign statistics over a study's trials.
StudySummary summarize_study(const std::vector<TrialResult>& trials,
                             Index tracked_portfolio, int n_bins = 10);

std::string format_summary(const StudySummary& summary);

struct PermutationCheck {
  bool holds = false;      ///< every permutation-sum inequality held
  double min_slack = 0.0;  ///< min over index lists of mean product - 1
  double max_slack = 0.0;  ///< equality everywhere iff max_slack ~ 0
};

/// Brute-force verification that for tethered returns, the mean over all
/// distinct permutations sigma of prod_t (1 + r[sigma_t][t]) is at least 1,
/// for every multiset of asset indices. Limits: m <= 4 assets, T <= 8
/// periods (the enumeration is exponential). Throws if the series is not
/// tethered.
PermutationCheck permutation_inequality_check(const Matrix& returns);

}  // namespace rebal
