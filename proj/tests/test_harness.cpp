#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <catch2/catch_amalgamated.hpp>

#include "essr/harness.hpp"
#include "essr/verify.hpp"

using namespace essr;
using Catch::Approx;

namespace {

ExperimentSpec small_spec(std::string env = "riverswim") {
  ExperimentSpec spec;
  spec.environment = std::move(env);
  spec.horizon = 200;
  spec.num_runs = 3;
  spec.base_seed = 11;
  spec.record_wall_clock = false;
  return spec;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::filesystem::path scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "essr_harness_test";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("horizon 1 returns the single step reward") {
  for (auto agent : {AgentKind::essr, AgentKind::sf_q, AgentKind::baseline_random}) {
    auto spec = small_spec("chain1");
    spec.agent = agent;
    spec.horizon = 1;
    spec.num_runs = 4;
    spec.log_steps = true;
    const auto report = run_experiment(spec);
    for (const auto& r : report.runs) {
      REQUIRE(r.reward_log->size() == 1);
      CHECK(r.cumulative_reward == (*r.reward_log)[0]);
    }
  }
  // The one-state cycle pays its reward on every step.
  const auto mdp = build_diagnostic_chain(1, 7.0);
  CHECK(run_essr(mdp, AgentConfig{}, 1, 0).cumulative_reward == 7.0);
}

TEST_CASE("cumulative reward matches the per-step log") {
  auto spec = small_spec();
  spec.log_steps = true;
  for (auto agent : {AgentKind::essr, AgentKind::sf_q, AgentKind::baseline_random}) {
    spec.agent = agent;
    for (const auto& r : run_experiment(spec).runs) {
      double total = 0.0;
      for (double x : *r.reward_log) total += x;
      CHECK(total == r.cumulative_reward);
      CHECK(static_cast<std::int64_t>(r.reward_log->size()) == spec.horizon);
      CHECK(r.final_counts.total() == spec.horizon);
    }
  }
}

TEST_CASE("invalid experiment specs are rejected") {
  auto spec = small_spec();
  spec.horizon = 0;
  CHECK_THROWS_AS(run_experiment(spec), std::invalid_argument);
  spec = small_spec();
  spec.num_runs = 0;
  CHECK_THROWS_AS(run_experiment(spec), std::invalid_argument);
  spec = small_spec("no-such-env");
  CHECK_THROWS(run_experiment(spec));
  spec = small_spec();
  CHECK_THROWS_AS(set_parameter(spec, "agent", "dqn"), std::invalid_argument);
  CHECK_THROWS_AS(set_parameter(spec, "gamma", "abc"), std::invalid_argument);
  CHECK_THROWS_AS(set_parameter(spec, "colour", "1"), std::invalid_argument);
  CHECK_THROWS_AS(set_parameter(spec, "scheme", "other"), std::invalid_argument);
}

TEST_CASE("report output") {
  const auto report = run_experiment(small_spec());
  const auto csv = report_csv(report);
  const auto rows = lines(csv);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "run_index,seed,cumulative_reward,wall_clock_ms");
  CHECK(rows[1].rfind("0,11,", 0) == 0);
  CHECK(rows[3].rfind("2,13,", 0) == 0);

  SECTION("JSON mean agrees with the CSV rows") {
    double sum = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      std::istringstream row(rows[i]);
      std::string field;
      for (int k = 0; k < 3; ++k) std::getline(row, field, ',');
      sum += std::stod(field);
    }
    const auto j = report_json(report);
    CHECK(j["mean"].get<double>() == Approx(sum / 3.0).epsilon(1e-12));
    CHECK(j["runs"].get<int>() == 3);
    CHECK(j["ci95"].get<double>() ==
          Approx(1.96 * j["std"].get<double>() / std::sqrt(3.0)).epsilon(1e-12));
    CHECK(j["config"]["env"] == "riverswim");
    CHECK(j["config"]["beta"].get<double>() == 100.0);
    CHECK(j["config"]["scheme"] == "algorithm1");
  }
  SECTION("re-emitting gives byte-identical files") {
    const auto dir = scratch_dir();
    emit_report(report, ReportFormat::csv, dir / "a.csv");
    emit_report(run_experiment(small_spec()), ReportFormat::csv, dir / "b.csv");
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    emit_report(report, ReportFormat::json, dir / "a.json");
    emit_report(report, ReportFormat::json, dir / "b.json");
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
    CHECK(nlohmann::json::parse(slurp(dir / "a.json"))["runs"] == 3);
  }
  SECTION("a single run has no standard deviation") {
    auto spec = small_spec();
    spec.num_runs = 1;
    const auto single = run_experiment(spec);
    CHECK_FALSE(single.stddev);
    CHECK(report_json(single)["std"].is_null());
  }
}

TEST_CASE("parallel and serial execution agree") {
  for (auto agent : {AgentKind::essr, AgentKind::sf_q}) {
    auto spec = small_spec();
    spec.agent = agent;
    spec.num_runs = 8;
    const auto serial = report_csv(run_experiment(spec));
    spec.workers = 4;
    CHECK(report_csv(run_experiment(spec)) == serial);
  }
}

TEST_CASE("runs are independent of the run count") {
  auto spec = small_spec();
  const auto three = run_experiment(spec);
  spec.num_runs = 5;
  const auto five = run_experiment(spec);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(three.runs[i].cumulative_reward == five.runs[i].cumulative_reward);
}

TEST_CASE("sweep") {
  auto spec = small_spec();
  CHECK_THROWS_AS(sweep(spec, "beta", {}), std::invalid_argument);
  CHECK_THROWS_AS(sweep(spec, "nonsense", {"1"}), std::invalid_argument);

  spec.num_runs = 1;
  const std::vector<std::string> values = {"1", "10"};
  const auto reports = sweep(spec, "beta", values);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].spec.config.beta == 1.0);
  CHECK(reports[1].spec.config.beta == 10.0);
  const auto rows = lines(sweep_csv("beta", values, reports));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "parameter,value,runs,mean,std,ci95");
  CHECK(rows[1].rfind("beta,1,1,", 0) == 0);
  CHECK(rows[1].substr(rows[1].size() - 2) == ",,");
  CHECK(sweep_json("beta", values, reports)["results"].size() == 2);
}

TEST_CASE("config files and overrides") {
  std::istringstream text(
      "# experiment\n"
      "env = sixarms\n"
      "beta = 1000   \n"
      "\n"
      "scheme = definition2\n"
      "runs = 7\n");
  ExperimentSpec spec;
  apply_config_stream(spec, text, "inline");
  CHECK(spec.environment == "sixarms");
  CHECK(spec.config.beta == 1000.0);
  CHECK(spec.config.counting_scheme == CountingScheme::definition2);
  CHECK(spec.num_runs == 7);
  set_parameter(spec, "beta", "10");
  CHECK(spec.config.beta == 10.0);

  std::istringstream bad("beta 3\n");
  CHECK_THROWS_AS(apply_config_stream(spec, bad, "inline"), std::invalid_argument);
  CHECK_THROWS(apply_config_file(spec, "/nonexistent/essr.cfg"));

  for (auto name : parameter_names()) CHECK_FALSE(name.empty());
}

TEST_CASE("verify suites run clean on a small budget") {
  for (auto suite : {VerifySuite::theorem1, VerifySuite::sr_identities,
                     VerifySuite::td_convergence, VerifySuite::oracle_equivalence}) {
    const auto report = verify(suite, 25, 3);
    INFO(to_string(suite) << ": " << report.counterexample);
    CHECK(report.passed());
    CHECK(report.trials == 25);
  }
  CHECK_THROWS_AS(parse_verify_suite("nope"), std::invalid_argument);
}
