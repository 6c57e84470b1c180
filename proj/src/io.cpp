#include "rebal/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rebal/errors.hpp"
#include "rebal/problem.hpp"

namespace rebal {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Matrix matrix_from_json(const json& node, const char* key) {
  if (!node.is_array() || node.empty() || !node.front().is_array()) {
    throw IoError(std::string("'") + key + "' must be an array of rows");
  }
  const Index m = static_cast<Index>(node.size());
  const Index n = static_cast<Index>(node.front().size());
  Matrix out(m, n);
  for (Index i = 0; i < m; ++i) {
    const json& row = node[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != n) {
      throw IoError(std::string("'") + key + "' rows must have equal length");
    }
    for (Index j = 0; j < n; ++j) {
      out(i, j) = row[static_cast<std::size_t>(j)].get<double>();
    }
  }
  return out;
}

Vector vector_from_json(const json& node, const char* key) {
  if (!node.is_array()) {
    throw IoError(std::string("'") + key + "' must be an array of numbers");
  }
  Vector out(static_cast<Index>(node.size()));
  for (std::size_t k = 0; k < node.size(); ++k) {
    out(static_cast<Index>(k)) = node[k].get<double>();
  }
  return out;
}

json parse_json(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw IoError("document is not valid JSON");
  return doc;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// 17 significant digits: enough for a double to survive the round trip.
std::string full_precision(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

ProblemDocument parse_problem_document(const std::string& text) {
  const json doc = parse_json(text);
  if (!doc.contains("M") || !doc.contains("a") || !doc.contains("p")) {
    throw IoError("problem document needs keys 'M', 'a' and 'p'");
  }
  const Matrix target = matrix_from_json(doc["M"], "M");
  const Vector assets = vector_from_json(doc["a"], "a");
  const Vector portfolios = vector_from_json(doc["p"], "p");

  ProblemDocument out;
  out.problem = validate_problem(target, assets, portfolios);
  if (doc.contains("banker_index")) {
    const auto one_based = doc["banker_index"].get<long>();
    if (one_based < 1 || one_based > target.cols()) {
      throw IoError("'banker_index' must be between 1 and the portfolio count");
    }
    out.banker_index = static_cast<Index>(one_based - 1);
  }
  if (doc.contains("allow_negative")) {
    out.allow_negative = doc["allow_negative"].get<bool>();
  }
  return out;
}

ProblemDocument load_problem_document(const std::string& path) {
  return parse_problem_document(read_file(path));
}

std::string serialize_allocation(const AllocationDocument& doc) {
  json out;
  out["process"] = doc.process;
  out["A"] = matrix_to_json(doc.proportions);
  out["A_dollar"] = matrix_to_json(doc.values);
  if (doc.x_prime) out["x_prime"] = vector_to_json(*doc.x_prime);
  if (doc.p_prime) out["p_prime"] = vector_to_json(*doc.p_prime);
  out["iterations"] = doc.iterations;
  out["max_gap"] = doc.max_gap;
  out["residuals"] = {{"row", doc.residual_row}, {"col", doc.residual_col}};
  return out.dump(2) + "\n";
}

AllocationDocument parse_allocation_document(const std::string& text) {
  const json doc = parse_json(text);
  AllocationDocument out;
  out.process = doc.at("process").get<std::string>();
  out.proportions = matrix_from_json(doc.at("A"), "A");
  out.values = matrix_from_json(doc.at("A_dollar"), "A_dollar");
  if (doc.contains("x_prime") && !doc["x_prime"].is_null()) {
    out.x_prime = vector_from_json(doc["x_prime"], "x_prime");
  }
  if (doc.contains("p_prime") && !doc["p_prime"].is_null()) {
    out.p_prime = vector_from_json(doc["p_prime"], "p_prime");
  }
  out.iterations = doc.value("iterations", 0);
  out.max_gap = doc.value("max_gap", 0.0);
  if (doc.contains("residuals")) {
    out.residual_row = doc["residuals"].value("row", 0.0);
    out.residual_col = doc["residuals"].value("col", 0.0);
  }
  return out;
}

SimulationConfig parse_simulation_config(const std::string& text) {
  const json doc = parse_json(text);
  SimulationConfig config;
  if (!doc.contains("M") || !doc.contains("start_portfolios")) {
    throw IoError("simulation config needs keys 'M' and 'start_portfolios'");
  }
  config.target = matrix_from_json(doc["M"], "M");
  config.start_portfolios =
      vector_from_json(doc["start_portfolios"], "start_portfolios");
  config.n_periods = doc.value("n_periods", 30);
  config.n_trials = doc.value("n_trials", 10000);
  config.tethered = doc.value("tethered", true);
  config.seed = doc.value("seed", std::uint64_t{0});

  const std::string process = doc.value("process", "market_invariant");
  if (process == "market_invariant") {
    config.process = ProcessKind::MarketInvariant;
  } else if (process == "banker") {
    config.process = ProcessKind::Banker;
  } else if (process == "linear") {
    config.process = ProcessKind::Linear;
  } else {
    throw IoError("unknown process '" + process +
                  "' (expected market_invariant, banker or linear)");
  }

  const Index n = config.target.cols();
  if (doc.contains("banker_index")) {
    const auto one_based = doc["banker_index"].get<long>();
    if (one_based < 1 || one_based > n) {
      throw IoError("'banker_index' must be between 1 and the portfolio count");
    }
    config.banker_index = static_cast<Index>(one_based - 1);
  } else if (config.process == ProcessKind::Banker) {
    throw IoError("banker process requires 'banker_index'");
  }
  if (doc.contains("shadow_of") && !doc["shadow_of"].is_null()) {
    const auto one_based = doc["shadow_of"].get<long>();
    if (one_based < 1 || one_based > n) {
      throw IoError("'shadow_of' must be between 1 and the portfolio count");
    }
    config.shadow_of = static_cast<Index>(one_based - 1);
  }
  const std::string mode = doc.value("shadow_mode", "target");
  if (mode == "target") {
    config.shadow_mode = ShadowMode::CompoundAtTarget;
  } else if (mode == "joint") {
    config.shadow_mode = ShadowMode::JointParticipant;
  } else {
    throw IoError("unknown shadow_mode '" + mode +
                  "' (expected 'target' or 'joint')");
  }
  const std::string policy = doc.value("banker_policy", "allow_negative");
  if (policy == "allow_negative") {
    config.banker_policy = BankerPolicy::AllowNegative;
  } else if (policy == "resample") {
    config.banker_policy = BankerPolicy::Resample;
  } else {
    throw IoError("unknown banker_policy '" + policy +
                  "' (expected 'allow_negative' or 'resample')");
  }
  config.solver_gap_rel = doc.value("solver_gap_rel", 1e-13);
  config.sample_variance = doc.value("sample_variance", false);
  config.max_resamples = doc.value("max_resamples", 100);
  return config;
}

SimulationConfig load_simulation_config(const std::string& path) {
  return parse_simulation_config(read_file(path));
}

std::string process_name(ProcessKind process) {
  switch (process) {
    case ProcessKind::MarketInvariant:
      return "market_invariant";
    case ProcessKind::Banker:
      return "banker";
    case ProcessKind::Linear:
      return "linear";
  }
  return "unknown";
}

void write_study_csv(std::ostream& out, const StudyResult& study,
                     ProcessKind process) {
  const std::string name = process_name(process);
  out << kStudyCsvHeader << "\n";
  for (std::size_t k = 0; k < study.trials.size(); ++k) {
    const TrialResult& trial = study.trials[k];
    for (Index j = 0; j < trial.total_returns.size(); ++j) {
      out << (k + 1) << ',' << name << ',' << (j + 1) << ','
          << full_precision(trial.total_returns(j)) << ','
          << full_precision(trial.weighted_return) << ','
          << full_precision(trial.weighted_variance) << ','
          << full_precision(trial.banker_minus_shadow) << "\n";
    }
  }
}

StudyTable read_study_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kStudyCsvHeader) {
    throw IoError("study CSV is missing the expected header");
  }
  StudyTable table;
  long last_trial = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(fields, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw IoError("study CSV row has wrong arity");
    const long trial = std::stol(cells[0]);
    if (trial == last_trial) continue;  // one observation per trial
    last_trial = trial;
    table.weighted_return.push_back(std::stod(cells[4]));
    table.weighted_variance.push_back(std::stod(cells[5]));
    table.banker_minus_shadow.push_back(std::stod(cells[6]));
  }
  if (table.weighted_return.empty()) throw IoError("study CSV has no rows");
  return table;
}

StudyTable load_study_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_study_csv(in);
}

}  // namespace rebal
