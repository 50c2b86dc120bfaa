// Command-line front end: run, sweep, verify, envs.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "essr/environments.hpp"
#include "essr/harness.hpp"
#include "essr/verify.hpp"

namespace {

/// Flags shared by run and sweep. Stored as text and applied through
/// essr::set_parameter so that a --config file can be overridden per key.
struct ExperimentFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
  bool log_steps = false;
  bool no_timing = false;
  std::string out;
  std::string format = "csv";

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "key = value file; flags override its entries")
        ->check(CLI::ExistingFile);
    add(app, "--env", "env", "environment name or .mdp file");
    add(app, "--agent", "agent", "essr | sf-q | baseline-random");
    add(app, "--gamma", "gamma", "discount");
    add(app, "--beta", "beta", "exploration bonus scale");
    add(app, "--tau", "tau", "Monte-Carlo mixing weight (sf-q)");
    add(app, "--alpha", "alpha", "successor-feature step size (sf-q)");
    add(app, "--horizon", "horizon", "steps per run");
    add(app, "--runs", "runs", "number of runs");
    add(app, "--seed", "seed", "base seed; run i uses seed + i");
    add(app, "--scheme", "scheme", "algorithm1 | definition2");
    add(app, "--workers", "workers", "parallel runs");
    add(app, "--eval-tolerance", "eval_tolerance", "policy evaluation stopping threshold");
    add(app, "--segment-length", "segment_length", "sf-q episode segment length");
    app.add_option("--out", out, "output file");
    app.add_option("--format", format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
    app.add_flag("--log-steps", log_steps, "keep per-step reward logs");
    app.add_flag("--no-timing", no_timing, "write wall_clock_ms as 0 for reproducible files");
  }

  void add(CLI::App& app, const std::string& flag, const std::string& key,
           const std::string& help) {
    app.add_option_function<std::string>(
        flag, [this, key](const std::string& v) { values[key] = v; }, help);
  }

  essr::ExperimentSpec build() const {
    essr::ExperimentSpec spec;
    if (!config_path.empty()) essr::apply_config_file(spec, config_path);
    for (const auto& [key, value] : values) essr::set_parameter(spec, key, value);
    if (log_steps) spec.log_steps = true;
    if (no_timing) spec.record_wall_clock = false;
    return spec;
  }
};

void print_summary(const essr::AggregateReport& report) {
  std::cout << report.spec.environment << " " << essr::to_string(report.spec.agent)
            << " runs=" << report.runs.size() << " mean=" << essr::format_number(report.mean);
  if (report.stddev) std::cout << " std=" << essr::format_number(*report.stddev);
  if (report.ci95) std::cout << " ci95=" << essr::format_number(*report.ci95);
  std::cout << '\n';
}

std::filesystem::path companion(const std::filesystem::path& out, const char* suffix) {
  return std::filesystem::path(out.string() + suffix);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular exploration with the substochastic successor representation"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run one experiment and aggregate it");
  ExperimentFlags run_flags;
  run_flags.attach(*run);

  auto* sweep = app.add_subcommand("sweep", "run one experiment per parameter value");
  ExperimentFlags sweep_flags;
  sweep_flags.attach(*sweep);
  std::string sweep_param;
  std::vector<std::string> sweep_values;
  sweep->add_option("--param", sweep_param, "parameter to vary (e.g. beta)")->required();
  sweep->add_option("--values", sweep_values, "values, comma separated")
      ->required()
      ->delimiter(',');

  auto* verify = app.add_subcommand("verify", "run a randomized property suite");
  std::string suite_name;
  std::int64_t trials = 1000;
  std::uint64_t verify_seed = 0;
  verify
      ->add_option("--suite", suite_name,
                   "theorem1 | sr-identities | td-convergence | oracle-equivalence")
      ->required();
  verify->add_option("--trials", trials, "random instances")->check(CLI::PositiveNumber);
  verify->add_option("--seed", verify_seed, "instance generator seed");

  auto* envs = app.add_subcommand("envs", "list environments");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*envs) {
      for (const auto& e : essr::registered_environments())
        std::cout << e.name << "\t" << e.summary << '\n';
      return 0;
    }

    if (*verify) {
      const auto suite = essr::parse_verify_suite(suite_name);
      const auto started = std::chrono::steady_clock::now();
      const auto report = essr::verify(suite, trials, verify_seed);
      const double seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      std::cout << essr::to_string(suite) << ": " << (report.passed() ? "pass" : "FAIL") << " ("
                << report.trials << " trials, " << report.failures << " failures, worst "
                << report.worst << ", " << seconds << " s)\n";
      if (!report.passed()) std::cout << "counterexample:\n" << report.counterexample;
      return report.passed() ? 0 : 1;
    }

    if (*run) {
      const auto spec = run_flags.build();
      const auto report = essr::run_experiment(spec);
      print_summary(report);
      if (!run_flags.out.empty()) {
        const auto format = essr::parse_report_format(run_flags.format);
        essr::emit_report(report, format, run_flags.out);
        if (format == essr::ReportFormat::csv)
          essr::emit_report(report, essr::ReportFormat::json,
                            companion(run_flags.out, ".summary.json"));
      }
      return 0;
    }

    if (*sweep) {
      const auto spec = sweep_flags.build();
      const auto reports = essr::sweep(spec, sweep_param, sweep_values);
      for (std::size_t i = 0; i < reports.size(); ++i) {
        std::cout << sweep_param << "=" << sweep_values[i] << ": ";
        print_summary(reports[i]);
      }
      if (!sweep_flags.out.empty()) {
        if (essr::parse_report_format(sweep_flags.format) == essr::ReportFormat::csv)
          essr::write_text_file(sweep_flags.out,
                                essr::sweep_csv(sweep_param, sweep_values, reports));
        else
          essr::write_text_file(sweep_flags.out,
                                essr::sweep_json(sweep_param, sweep_values, reports).dump(2) + "\n");
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
