#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rebal/errors.hpp"
#include "rebal/io.hpp"
#include "rebal/market_invariant.hpp"
#include "rebal/ols.hpp"
#include "rebal/problem.hpp"
#include "rebal/processes.hpp"
#include "rebal/simulation.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitInfeasible = 2;

struct SolveOptions {
  std::string process;
  std::string input;
  std::string output;
  std::optional<long> banker_index;  // 1-based on the command line
  double tol = -1.0;
  int max_iter = 10000;
  bool allow_negative = false;
  bool enforce_zero_pattern = false;
};

rebal::AllocationDocument document_from(const rebal::AllocationResult& result) {
  rebal::AllocationDocument doc;
  doc.proportions = result.proportions;
  doc.values = result.values;
  doc.process = result.process_tag;
  doc.residual_row = result.max_row_residual();
  doc.residual_col = result.max_col_residual();
  return doc;
}

int run_solve(const SolveOptions& opt) {
  const rebal::ProblemDocument input = rebal::load_problem_document(opt.input);
  const rebal::RebalanceProblem& problem = input.problem;

  rebal::BankerConfig banker;
  banker.allow_negative = opt.allow_negative || input.allow_negative;
  if (opt.banker_index) {
    if (*opt.banker_index < 1 ||
        *opt.banker_index > problem.portfolio_count()) {
      throw rebal::IoError("--banker-index must be between 1 and the portfolio count");
    }
    banker.banker_index = static_cast<rebal::Index>(*opt.banker_index - 1);
  } else if (input.banker_index) {
    banker.banker_index = *input.banker_index;
  } else if (opt.process == "banker" || opt.process == "proportional-banker") {
    throw rebal::IoError(
        "banker processes need --banker-index or a 'banker_index' key");
  }

  rebal::AllocationDocument doc;
  if (opt.process == "banker") {
    doc = document_from(rebal::banker_rebalance(problem, banker));
  } else if (opt.process == "linear") {
    doc = document_from(rebal::linear_rebalance(problem, banker.allow_negative));
  } else if (opt.process == "greedy") {
    doc = document_from(
        rebal::greedy_allocate(problem, opt.enforce_zero_pattern));
  } else if (opt.process == "proportional-banker") {
    doc = document_from(rebal::proportional_then_banker(problem, banker));
  } else if (opt.process == "market-invariant") {
    const rebal::IpfResult solved =
        rebal::ipf_solve(problem, opt.max_iter, opt.tol);
    doc = document_from(solved.allocation);
    doc.x_prime = solved.scaling.x_prime;
    doc.p_prime = solved.scaling.p_prime;
    doc.iterations = solved.trace.iterations_used;
    doc.max_gap = solved.trace.max_gap;
  } else if (opt.process == "analytic") {
    const rebal::AnalyticSolution solved = rebal::analytic_solve(problem);
    doc = document_from(solved.allocation);
    doc.x_prime = solved.scaling.x_prime;
    doc.p_prime = solved.scaling.p_prime;
  } else if (opt.process == "hybrid") {
    const rebal::PartitionTree tree = rebal::PartitionTree::index_halving(
        problem.asset_count(), problem.portfolio_count());
    doc = document_from(rebal::grouped_hybrid(problem, tree));
  } else {
    throw rebal::IoError("unknown process '" + opt.process + "'");
  }

  const std::string text = rebal::serialize_allocation(doc);
  if (opt.output.empty() || opt.output == "-") {
    std::cout << text;
  } else {
    std::ofstream out(opt.output, std::ios::binary);
    if (!out) throw rebal::IoError("cannot write '" + opt.output + "'");
    out << text;
  }
  return kExitOk;
}

int run_simulate(const std::string& config_path, const std::string& out_path,
                 int threads) {
  const rebal::SimulationConfig config =
      rebal::load_simulation_config(config_path);
  const rebal::StudyResult study = rebal::run_study(config, threads);

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw rebal::IoError("cannot write '" + out_path + "'");
  rebal::write_study_csv(out, study, config.process);

  const rebal::Index tracked =
      config.shadow_of.value_or(config.process == rebal::ProcessKind::Banker
                                    ? config.banker_index
                                    : rebal::Index{0});
  std::cout << rebal::format_summary(
      rebal::summarize_study(study.trials, tracked));
  if (study.total_resamples > 0) {
    std::cout << "trials redrawn after banker infeasibility: "
              << study.total_resamples << "\n";
  }
  return kExitOk;
}

int run_regress(const std::string& in_path, const std::string& model,
                std::string json_out) {
  const rebal::StudyTable table = rebal::load_study_csv(in_path);
  const auto n = static_cast<rebal::Index>(table.banker_minus_shadow.size());

  rebal::Vector response(n), variance(n), mean_return(n);
  for (rebal::Index k = 0; k < n; ++k) {
    response(k) = table.banker_minus_shadow[static_cast<std::size_t>(k)];
    variance(k) = table.weighted_variance[static_cast<std::size_t>(k)];
    mean_return(k) = table.weighted_return[static_cast<std::size_t>(k)];
  }
  if (response.hasNaN()) {
    throw rebal::IoError(
        "study has no shadow comparison; rerun simulate with 'shadow_of'");
  }

  rebal::Matrix design;
  std::vector<std::string> names;
  if (model == "v") {
    design.resize(n, 2);
    design.col(0).setOnes();
    design.col(1) = variance;
    names = {"(Intercept)", "v"};
  } else if (model == "v_r") {
    design.resize(n, 3);
    design.col(0).setOnes();
    design.col(1) = variance;
    design.col(2) = mean_return;
    names = {"(Intercept)", "v", "r"};
  } else if (model == "v_r_r2") {
    design.resize(n, 4);
    design.col(0).setOnes();
    design.col(1) = mean_return;
    design.col(2) = mean_return.cwiseAbs2();
    design.col(3) = variance;
    names = {"(Intercept)", "r", "r2", "v"};
  } else {
    throw rebal::IoError("unknown model '" + model +
                         "' (expected v, v_r or v_r_r2)");
  }

  const rebal::RegressionResult result =
      rebal::ols_regress(design, response, names);
  std::cout << "Linear regression model: banker_minus_shadow ~ " << model
            << "\n"
            << rebal::format_regression(result);

  if (json_out.empty()) json_out = in_path + ".regression.json";
  std::ofstream machine(json_out, std::ios::binary);
  if (!machine) throw rebal::IoError("cannot write '" + json_out + "'");
  machine << "{\n  \"model\": \"" << model << "\",\n  \"terms\": [";
  for (std::size_t c = 0; c < result.term_names.size(); ++c) {
    const auto i = static_cast<rebal::Index>(c);
    machine << (c ? ",\n    " : "\n    ");
    machine << "{\"name\": \"" << result.term_names[c]
            << "\", \"estimate\": " << result.coefficients(i)
            << ", \"se\": " << result.standard_errors(i)
            << ", \"t\": " << result.t_statistics(i)
            << ", \"p\": " << result.p_values(i) << "}";
  }
  machine << "\n  ],\n  \"r_squared\": " << result.r_squared
          << ",\n  \"adjusted_r_squared\": " << result.adjusted_r_squared
          << ",\n  \"f_statistic\": " << result.f_statistic
          << ",\n  \"n\": " << result.n_observations << "\n}\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Internal multi-portfolio rebalancing toolkit"};
  app.require_subcommand(1);

  SolveOptions solve_opt;
  CLI::App* solve = app.add_subcommand(
      "solve", "Allocate one problem file with a chosen process");
  solve
      ->add_option("--process", solve_opt.process,
                   "banker|linear|greedy|proportional-banker|market-invariant|"
                   "analytic|hybrid")
      ->required();
  solve->add_option("--input", solve_opt.input, "problem JSON file")->required();
  solve->add_option("--output", solve_opt.output,
                    "allocation JSON file ('-' for stdout)");
  long banker_flag = 0;
  CLI::Option* banker_opt = solve->add_option(
      "--banker-index", banker_flag, "banker portfolio (1-based)");
  solve->add_option("--tol", solve_opt.tol,
                    "gap tolerance for market-invariant (currency units)");
  solve->add_option("--max-iter", solve_opt.max_iter,
                    "sweep budget for market-invariant");
  solve->add_flag("--allow-negative", solve_opt.allow_negative,
                  "permit negative allocations");
  solve->add_flag("--enforce-zero-pattern", solve_opt.enforce_zero_pattern,
                  "greedy: keep zeros of the target");

  std::string sim_config, sim_out;
  int sim_threads = 1;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Run a rebalance-and-return study to CSV");
  simulate->add_option("--config", sim_config, "SimulationConfig JSON file")
      ->required();
  simulate->add_option("--out", sim_out, "output CSV path")->required();
  simulate->add_option("--threads", sim_threads, "worker threads (default 1)");

  std::string reg_in, reg_model = "v", reg_out;
  CLI::App* regress = app.add_subcommand(
      "regress", "Fit banker-minus-shadow against study statistics");
  regress->add_option("--in", reg_in, "study CSV from 'simulate'")->required();
  regress->add_option("--model", reg_model, "v|v_r|v_r_r2");
  regress->add_option("--out", reg_out,
                      "machine-readable result path (default <in>.regression.json)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) {
      if (banker_opt->count()) solve_opt.banker_index = banker_flag;
      return run_solve(solve_opt);
    }
    if (simulate->parsed()) {
      return run_simulate(sim_config, sim_out, sim_threads);
    }
    if (regress->parsed()) {
      return run_regress(reg_in, reg_model, reg_out);
    }
  } catch (const rebal::InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  return kExitInputError;
}
