#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <rebal/io.hpp>
#include <rebal/market_invariant.hpp>
#include <rebal/problem.hpp>
#include <rebal/simulation.hpp>

using namespace rebal;

namespace {

const char* kWorkedProblem = R"({
  "M": [[0.3, 0.5], [0.7, 0.5]],
  "a": [100, 200],
  "p": [120, 180],
  "banker_index": 1
})";

std::string temp_path(const std::string& name) {
  return std::string("rebal_test_") + name;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

int run_cli(const std::string& args) {
  const std::string command =
      std::string(REBAL_CLI_PATH) + " " + args + " 2>/dev/null";
  const int status = std::system(command.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("problem documents parse with 1-based banker indices") {
  const ProblemDocument doc = parse_problem_document(kWorkedProblem);
  CHECK(doc.problem.asset_count() == 2);
  CHECK(doc.problem.portfolios(1) == 180);
  REQUIRE(doc.banker_index.has_value());
  CHECK(*doc.banker_index == 0);
  CHECK(!doc.allow_negative);
}

TEST_CASE("malformed problem documents fail cleanly") {
  CHECK_THROWS_AS(parse_problem_document("{"), IoError);
  CHECK_THROWS_AS(parse_problem_document("{\"M\": [[1]]}"), IoError);
  CHECK_THROWS_AS(
      parse_problem_document(
          R"({"M": [[0.3,0.5],[0.7,0.5]], "a": [100,200], "p": [120,190]})"),
      TotalMismatchError);
  CHECK_THROWS_AS(
      parse_problem_document(
          R"({"M": [[0.3,0.5],[0.7,0.5]], "a": [100,200], "p": [120,180],
              "banker_index": 3})"),
      IoError);
}

TEST_CASE("allocation documents round-trip at full precision") {
  const ProblemDocument doc = parse_problem_document(kWorkedProblem);
  const IpfResult solved = ipf_solve(doc.problem);

  AllocationDocument out;
  out.proportions = solved.allocation.proportions;
  out.values = solved.allocation.values;
  out.process = solved.allocation.process_tag;
  out.x_prime = solved.scaling.x_prime;
  out.p_prime = solved.scaling.p_prime;
  out.iterations = solved.trace.iterations_used;
  out.max_gap = solved.trace.max_gap;
  out.residual_row = solved.allocation.max_row_residual();
  out.residual_col = solved.allocation.max_col_residual();

  const std::string text = serialize_allocation(out);
  const AllocationDocument back = parse_allocation_document(text);
  CHECK(back.values == out.values);  // bit-exact round trip
  CHECK(back.proportions == out.proportions);
  REQUIRE(back.x_prime.has_value());
  CHECK(*back.x_prime == *out.x_prime);
  CHECK(back.iterations == out.iterations);
}

TEST_CASE("simulation configs parse their enums and indices") {
  const SimulationConfig config = parse_simulation_config(R"({
    "M": [[0.6, 0.5], [0.4, 0.5]],
    "start_portfolios": [100, 300],
    "n_periods": 12,
    "n_trials": 7,
    "tethered": false,
    "process": "banker",
    "banker_index": 2,
    "shadow_of": 2,
    "shadow_mode": "joint",
    "seed": 99
  })");
  CHECK(config.n_periods == 12);
  CHECK(config.process == ProcessKind::Banker);
  CHECK(config.banker_index == 1);
  CHECK(config.shadow_of == Index{1});
  CHECK(config.shadow_mode == ShadowMode::JointParticipant);
  CHECK(config.seed == 99);

  CHECK_THROWS_AS(parse_simulation_config(R"({
    "M": [[1.0]], "start_portfolios": [10], "process": "banker"
  })"),
                  IoError);  // banker needs an index
}

TEST_CASE("study CSV header is stable") {
  CHECK(std::string(kStudyCsvHeader) ==
        "trial,process,portfolio_index,total_return,weighted_return,"
        "weighted_variance,banker_minus_shadow");
}

TEST_CASE("study CSV writes one row per trial and portfolio") {
  SimulationConfig config;
  config.target.resize(2, 2);
  config.target << 0.6, 0.5, 0.4, 0.5;
  config.start_portfolios.resize(2);
  config.start_portfolios << 100, 300;
  config.n_periods = 5;
  config.n_trials = 3;
  config.tethered = true;
  config.process = ProcessKind::Linear;
  config.shadow_of = 0;
  config.seed = 5;
  const StudyResult study = run_study(config);

  std::ostringstream out;
  write_study_csv(out, study, config.process);
  std::istringstream in(out.str());
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == kStudyCsvHeader);
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
    CHECK(line.find("linear") != std::string::npos);
  }
  CHECK(rows == 3 * 2);

  std::istringstream again(out.str());
  const StudyTable table = read_study_csv(again);
  CHECK(table.weighted_variance.size() == 3);  // deduplicated per trial
  CHECK(table.banker_minus_shadow[0] ==
        study.trials[0].banker_minus_shadow);
}

TEST_CASE("cli solves the worked problem through every process") {
  const std::string problem_path = temp_path("problem.json");
  const std::string out_path = temp_path("out.json");
  write_file(problem_path, kWorkedProblem);

  for (const std::string process :
       {"banker", "linear", "greedy", "proportional-banker",
        "market-invariant", "analytic", "hybrid"}) {
    const int code = run_cli("solve --process " + process + " --input " +
                             problem_path + " --output " + out_path);
    CHECK(code == 0);
    const AllocationDocument doc = parse_allocation_document(slurp(out_path));
    // Re-validate what the document promises: columns of A sum to 1.
    for (Index j = 0; j < doc.proportions.cols(); ++j) {
      CHECK(doc.proportions.col(j).sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
    if (process == "market-invariant" || process == "analytic") {
      CHECK(doc.values(0, 0) == doctest::Approx(27.1003).epsilon(2e-5));
      CHECK(doc.values(1, 1) == doctest::Approx(107.1003).epsilon(2e-5));
      REQUIRE(doc.x_prime.has_value());
    }
  }
  std::remove(problem_path.c_str());
  std::remove(out_path.c_str());
}

TEST_CASE("cli reports input errors and infeasibility distinctly") {
  const std::string problem_path = temp_path("problem3.json");
  const std::string out_path = temp_path("out3.json");

  // Analytic solver does not cover 3x3.
  write_file(problem_path, R"({
    "M": [[0.3,0.4,0.5],[0.3,0.2,0.3],[0.4,0.4,0.2]],
    "a": [100,100,100],
    "p": [100,100,100]
  })");
  CHECK(run_cli("solve --process analytic --input " + problem_path +
                " --output " + out_path) == 1);

  // Banker infeasibility maps to exit 2.
  write_file(problem_path, R"({
    "M": [[0.5,0.5],[0.5,0.5]],
    "a": [160,40],
    "p": [100,100]
  })");
  CHECK(run_cli("solve --process banker --banker-index 2 --input " +
                problem_path + " --output " + out_path) == 2);
  CHECK(run_cli("solve --process banker --input " + problem_path +
                " --output " + out_path) == 1);  // missing banker index
  CHECK(run_cli("solve --process banker --banker-index 2 --allow-negative "
                "--input " +
                problem_path + " --output " + out_path) == 0);

  CHECK(run_cli("solve --process market-invariant --input missing.json") == 1);
  std::remove(problem_path.c_str());
  std::remove(out_path.c_str());
}

TEST_CASE("cli simulation output is byte-identical across runs") {
  const std::string config_path = temp_path("sim.json");
  const std::string csv1 = temp_path("study1.csv");
  const std::string csv2 = temp_path("study2.csv");
  write_file(config_path, R"({
    "M": [[0.2,0.05,0.05,0.01],[0.2,0.05,0.05,0.02],[0.15,0.25,0.25,0.35],
          [0.15,0.3,0.3,0.4],[0.3,0.35,0.35,0.22]],
    "start_portfolios": [50, 540, 50, 80],
    "n_periods": 30,
    "n_trials": 20,
    "tethered": true,
    "process": "banker",
    "banker_index": 2,
    "shadow_of": 2,
    "seed": 31
  })");
  CHECK(run_cli("simulate --config " + config_path + " --out " + csv1 +
                " >/dev/null") == 0);
  CHECK(run_cli("simulate --config " + config_path + " --out " + csv2 +
                " --threads 3 >/dev/null") == 0);
  CHECK(slurp(csv1) == slurp(csv2));

  // Banker rows are all negative on tethered series.
  std::istringstream in(slurp(csv1));
  const StudyTable table = read_study_csv(in);
  for (double diff : table.banker_minus_shadow) CHECK(diff < 0.0);

  const int reg = run_cli("regress --in " + csv1 + " --model v --out " +
                          temp_path("reg.json") + " >/dev/null");
  CHECK(reg == 0);
  const std::string machine = slurp(temp_path("reg.json"));
  CHECK(machine.find("r_squared") != std::string::npos);

  CHECK(run_cli("regress --in missing.csv --model v") == 1);
  CHECK(run_cli("regress --in " + csv1 + " --model bogus") == 1);

  std::remove(config_path.c_str());
  std::remove(csv1.c_str());
  std::remove(csv2.c_str());
  std::remove(temp_path("reg.json").c_str());
}
