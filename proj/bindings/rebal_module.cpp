#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rebal/io.hpp"
#include "rebal/market_invariant.hpp"
#include "rebal/ols.hpp"
#include "rebal/problem.hpp"
#include "rebal/processes.hpp"
#include "rebal/simulation.hpp"

namespace py = pybind11;
using namespace rebal;

PYBIND11_MODULE(_rebal, m) {
  m.doc() = "Internal multi-portfolio rebalancing processes";

  py::register_exception<InfeasibleError>(m, "InfeasibleError");

  py::class_<RebalanceProblem>(m, "RebalanceProblem")
      .def_readonly("target", &RebalanceProblem::target)
      .def_readonly("assets", &RebalanceProblem::assets)
      .def_readonly("portfolios", &RebalanceProblem::portfolios)
      .def("total", &RebalanceProblem::total);

  py::class_<AllocationResult>(m, "AllocationResult")
      .def_readonly("proportions", &AllocationResult::proportions)
      .def_readonly("values", &AllocationResult::values)
      .def_readonly("process_tag", &AllocationResult::process_tag)
      .def_readonly("residual_row", &AllocationResult::residual_row)
      .def_readonly("residual_col", &AllocationResult::residual_col)
      .def_readonly("tolerance", &AllocationResult::tolerance);

  py::class_<FeasibilityReport>(m, "FeasibilityReport")
      .def_readonly("feasible", &FeasibilityReport::feasible)
      .def_readonly("zero_pattern_enforced",
                    &FeasibilityReport::zero_pattern_enforced)
      .def_property_readonly("witness", [](const FeasibilityReport& r) {
        return r.witness ? py::cast(r.witness->describe()) : py::none().cast<py::object>();
      });

  py::class_<ScalingSolution>(m, "ScalingSolution")
      .def_readonly("x_prime", &ScalingSolution::x_prime)
      .def_readonly("p_prime", &ScalingSolution::p_prime)
      .def_readonly("a_prime", &ScalingSolution::a_prime);

  py::class_<IpfTrace>(m, "IpfTrace")
      .def_readonly("iterations_used", &IpfTrace::iterations_used)
      .def_readonly("max_gap", &IpfTrace::max_gap)
      .def_readonly("row_gap", &IpfTrace::row_gap)
      .def_readonly("converged", &IpfTrace::converged);

  py::class_<IpfResult>(m, "IpfResult")
      .def_readonly("allocation", &IpfResult::allocation)
      .def_readonly("scaling", &IpfResult::scaling)
      .def_readonly("trace", &IpfResult::trace);

  py::class_<AnalyticSolution>(m, "AnalyticSolution")
      .def_readonly("allocation", &AnalyticSolution::allocation)
      .def_readonly("scaling", &AnalyticSolution::scaling)
      .def_readonly("root", &AnalyticSolution::root)
      .def_readonly("nonnegative", &AnalyticSolution::nonnegative);

  m.def("validate_problem", &validate_problem, py::arg("target"),
        py::arg("assets"), py::arg("portfolios"),
        py::arg("eps_col") = kColumnSumTol, py::arg("eps_tot") = kTotalTol);
  m.def("check_feasibility", &check_feasibility, py::arg("problem"),
        py::arg("enforce_zero_pattern"));
  m.def("greedy_allocate", &greedy_allocate, py::arg("problem"),
        py::arg("enforce_zero_pattern") = false);
  m.def("proportions_from_values", &proportions_from_values, py::arg("values"),
        py::arg("portfolios"), py::arg("target"));
  m.def("perturb_allocation", &perturb_allocation, py::arg("result"),
        py::arg("alpha"), py::arg("seed"));

  m.def(
      "banker_rebalance",
      [](const RebalanceProblem& problem, Index banker_index,
         bool allow_negative) {
        return banker_rebalance(problem, {banker_index, allow_negative});
      },
      py::arg("problem"), py::arg("banker_index"),
      py::arg("allow_negative") = false);
  m.def("linear_rebalance", &linear_rebalance, py::arg("problem"),
        py::arg("allow_negative") = false);
  m.def(
      "proportional_then_banker",
      [](const RebalanceProblem& problem, Index banker_index,
         bool allow_negative) {
        return proportional_then_banker(problem, {banker_index, allow_negative});
      },
      py::arg("problem"), py::arg("banker_index"),
      py::arg("allow_negative") = false);
  m.def(
      "grouped_hybrid",
      [](const RebalanceProblem& problem) {
        const PartitionTree tree = PartitionTree::index_halving(
            problem.asset_count(), problem.portfolio_count());
        return grouped_hybrid(problem, tree);
      },
      py::arg("problem"), "Grouped aggregation with the index-halving tree");

  m.def("ipf_solve", &ipf_solve, py::arg("problem"),
        py::arg("max_iter") = 10000, py::arg("q") = -1.0);
  m.def(
      "analytic_2x2",
      [](const RebalanceProblem& problem, bool negative_branch) {
        return analytic_2x2(problem, negative_branch
                                         ? QuadraticBranch::Negative
                                         : QuadraticBranch::Positive);
      },
      py::arg("problem"), py::arg("negative_branch") = false);
  m.def("analytic_2x3", &analytic_2x3, py::arg("problem"));
  m.def("analytic_2x4", &analytic_2x4, py::arg("problem"));
  m.def("analytic_solve", &analytic_solve, py::arg("problem"));
  m.def("transpose_reduce", &transpose_reduce, py::arg("problem"));
  m.def("equation_residuals", &equation_residuals, py::arg("problem"),
        py::arg("solution"));
  m.def("kl_objective", &kl_objective, py::arg("result"), py::arg("problem"));
  m.def("verify_market_invariance", &verify_market_invariance,
        py::arg("problem"), py::arg("x"), py::arg("q") = -1.0);

  py::class_<TrialResult>(m, "TrialResult")
      .def_readonly("total_returns", &TrialResult::total_returns)
      .def_readonly("weighted_return", &TrialResult::weighted_return)
      .def_readonly("weighted_variance", &TrialResult::weighted_variance)
      .def_readonly("shadow_return", &TrialResult::shadow_return)
      .def_readonly("banker_minus_shadow", &TrialResult::banker_minus_shadow);

  py::class_<SimulationConfig>(m, "SimulationConfig")
      .def(py::init<>())
      .def_readwrite("target", &SimulationConfig::target)
      .def_readwrite("start_portfolios", &SimulationConfig::start_portfolios)
      .def_readwrite("n_periods", &SimulationConfig::n_periods)
      .def_readwrite("n_trials", &SimulationConfig::n_trials)
      .def_readwrite("tethered", &SimulationConfig::tethered)
      .def_readwrite("banker_index", &SimulationConfig::banker_index)
      .def_readwrite("shadow_of", &SimulationConfig::shadow_of)
      .def_readwrite("seed", &SimulationConfig::seed)
      .def_property(
          "process",
          [](const SimulationConfig& c) { return process_name(c.process); },
          [](SimulationConfig& c, const std::string& name) {
            if (name == "market_invariant") {
              c.process = ProcessKind::MarketInvariant;
            } else if (name == "banker") {
              c.process = ProcessKind::Banker;
            } else if (name == "linear") {
              c.process = ProcessKind::Linear;
            } else {
              throw std::invalid_argument("unknown process '" + name + "'");
            }
          })
      .def_property(
          "shadow_mode",
          [](const SimulationConfig& c) {
            return c.shadow_mode == ShadowMode::JointParticipant ? "joint"
                                                                 : "target";
          },
          [](SimulationConfig& c, const std::string& name) {
            if (name == "target") {
              c.shadow_mode = ShadowMode::CompoundAtTarget;
            } else if (name == "joint") {
              c.shadow_mode = ShadowMode::JointParticipant;
            } else {
              throw std::invalid_argument("unknown shadow_mode '" + name + "'");
            }
          })
      .def_property(
          "banker_policy",
          [](const SimulationConfig& c) {
            return c.banker_policy == BankerPolicy::Resample ? "resample"
                                                             : "allow_negative";
          },
          [](SimulationConfig& c, const std::string& name) {
            if (name == "allow_negative") {
              c.banker_policy = BankerPolicy::AllowNegative;
            } else if (name == "resample") {
              c.banker_policy = BankerPolicy::Resample;
            } else {
              throw std::invalid_argument("unknown banker_policy '" + name +
                                          "'");
            }
          });

  m.def("gen_returns", &gen_returns, py::arg("config"), py::arg("seed"));
  m.def("run_trial", &run_trial, py::arg("config"), py::arg("returns"));
  m.def(
      "run_study",
      [](const SimulationConfig& config, int n_threads) {
        StudyResult study = run_study(config, n_threads);
        return study.trials;
      },
      py::arg("config"), py::arg("n_threads") = 1);
  m.def(
      "permutation_inequality_check",
      [](const Matrix& returns) {
        const PermutationCheck check = permutation_inequality_check(returns);
        return py::make_tuple(check.holds, check.min_slack, check.max_slack);
      },
      py::arg("returns"));

  py::class_<RegressionResult>(m, "RegressionResult")
      .def_readonly("term_names", &RegressionResult::term_names)
      .def_readonly("coefficients", &RegressionResult::coefficients)
      .def_readonly("standard_errors", &RegressionResult::standard_errors)
      .def_readonly("t_statistics", &RegressionResult::t_statistics)
      .def_readonly("p_values", &RegressionResult::p_values)
      .def_readonly("r_squared", &RegressionResult::r_squared)
      .def_readonly("adjusted_r_squared", &RegressionResult::adjusted_r_squared)
      .def_readonly("f_statistic", &RegressionResult::f_statistic)
      .def_readonly("n_observations", &RegressionResult::n_observations);
  m.def("ols_regress", &ols_regress, py::arg("design"), py::arg("response"),
        py::arg("term_names"));
}
