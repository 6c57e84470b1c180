#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rebal/market_invariant.hpp"
#include "rebal/simulation.hpp"
#include "rebal/types.hpp"

namespace rebal {

/// Problem file contents: the validated problem plus the optional knobs a
/// document may carry. Indices are 1-based in documents and converted here.
struct ProblemDocument {
  RebalanceProblem problem;
  std::optional<Index> banker_index;  ///< 0-based after parsing
  bool allow_negative = false;
};

ProblemDocument parse_problem_document(const std::string& text);
ProblemDocument load_problem_document(const std::string& path);

/// Serialized solver output. Numbers are written with 17 significant digits
/// so documents round-trip losslessly.
struct AllocationDocument {
  Matrix proportions;
  Matrix values;
  std::string process;
  std::optional<Vector> x_prime;
  std::optional<Vector> p_prime;
  int iterations = 0;
  double max_gap = 0.0;
  double residual_row = 0.0;
  double residual_col = 0.0;
};

std::string serialize_allocation(const AllocationDocument& doc);
AllocationDocument parse_allocation_document(const std::string& text);

SimulationConfig parse_simulation_config(const std::string& text);
SimulationConfig load_simulation_config(const std::string& path);

/// Fixed study CSV schema, one row per (trial, portfolio).
inline constexpr const char* kStudyCsvHeader =
    "trial,process,portfolio_index,total_return,weighted_return,"
    "weighted_variance,banker_minus_shadow";

void write_study_csv(std::ostream& out, const StudyResult& study,
                     ProcessKind process);

/// Per-trial regression inputs recovered from a study CSV.
struct StudyTable {
  std::vector<double> weighted_return;
  std::vector<double> weighted_variance;
  std::vector<double> banker_minus_shadow;
};

StudyTable read_study_csv(std::istream& in);
StudyTable load_study_csv(const std::string& path);

std::string process_name(ProcessKind process);

}  // namespace rebal
