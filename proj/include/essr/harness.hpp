#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <vector>

#include "json.hpp"

#include "essr/environments.hpp"
#include "essr/essr_agent.hpp"
#include "essr/planning.hpp"
#include "essr/random.hpp"
#include "essr/run_result.hpp"
#include "essr/td_sr.hpp"

namespace essr {

enum class AgentKind { essr, sf_q, baseline_random };

inline std::string_view to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::essr: return "essr";
    case AgentKind::sf_q: return "sf-q";
    case AgentKind::baseline_random: return "baseline-random";
  }
  return "?";
}

inline AgentKind parse_agent_kind(std::string_view text) {
  if (text == "essr") return AgentKind::essr;
  if (text == "sf-q") return AgentKind::sf_q;
  if (text == "baseline-random") return AgentKind::baseline_random;
  throw std::invalid_argument("unknown agent '" + std::string(text) + "'");
}

struct ExperimentSpec {
  std::string environment = "riverswim";
  AgentKind agent = AgentKind::essr;
  AgentConfig config;
  std::int64_t horizon = 5000;
  std::int64_t num_runs = 100;
  std::uint64_t base_seed = 0;
  unsigned workers = 1;
  bool log_steps = false;
  /// When false, wall_clock_ms is written as 0 so output files are
  /// byte-reproducible.
  bool record_wall_clock = true;

  void validate() const {
    if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
    if (num_runs < 1) throw std::invalid_argument("runs must be at least 1");
    if (workers < 1) throw std::invalid_argument("workers must be at least 1");
    config.validate();
  }
};

namespace detail {

inline double parse_double(std::string_view key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double x = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::logic_error&) {
    throw std::invalid_argument("bad value '" + value + "' for " + std::string(key));
  }
}

inline std::int64_t parse_int(std::string_view key, const std::string& value) {
  std::int64_t x = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, x);
  if (ec != std::errc() || ptr != end)
    throw std::invalid_argument("bad value '" + value + "' for " + std::string(key));
  return x;
}

inline bool parse_bool(std::string_view key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw std::invalid_argument("bad value '" + value + "' for " + std::string(key));
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

/// Keys accepted by set_parameter, config files and sweeps.
inline const std::vector<std::string_view>& parameter_names() {
  static const std::vector<std::string_view> names = {
      "env",          "agent",          "gamma",
      "beta",         "tau",            "alpha",
      "q_step_size",  "eval_tolerance", "scheme",
      "max_eval_sweeps", "max_policy_iterations", "replan_interval",
      "segment_length", "epsilon_start", "epsilon_end",
      "epsilon_anneal_fraction", "max_bonus", "horizon",
      "runs",         "seed",           "workers",
      "log_steps",    "timing"};
  return names;
}

/// Assigns one named field of the spec from its text form.
inline void set_parameter(ExperimentSpec& spec, std::string_view name, const std::string& value) {
  auto& c = spec.config;
  if (name == "env") spec.environment = value;
  else if (name == "agent") spec.agent = parse_agent_kind(value);
  else if (name == "gamma") c.gamma = detail::parse_double(name, value);
  else if (name == "beta") c.beta = detail::parse_double(name, value);
  else if (name == "tau") c.tau = detail::parse_double(name, value);
  else if (name == "alpha") c.alpha = detail::parse_double(name, value);
  else if (name == "q_step_size") c.q_step_size = detail::parse_double(name, value);
  else if (name == "eval_tolerance") c.eval_tolerance = detail::parse_double(name, value);
  else if (name == "scheme") c.counting_scheme = parse_counting_scheme(value);
  else if (name == "max_eval_sweeps") c.max_eval_sweeps = detail::parse_int(name, value);
  else if (name == "max_policy_iterations") c.max_policy_iterations = detail::parse_int(name, value);
  else if (name == "replan_interval") c.replan_interval = detail::parse_int(name, value);
  else if (name == "segment_length") c.segment_length = detail::parse_int(name, value);
  else if (name == "epsilon_start") c.epsilon_start = detail::parse_double(name, value);
  else if (name == "epsilon_end") c.epsilon_end = detail::parse_double(name, value);
  else if (name == "epsilon_anneal_fraction")
    c.epsilon_anneal_fraction = detail::parse_double(name, value);
  else if (name == "max_bonus") c.max_bonus = detail::parse_double(name, value);
  else if (name == "horizon") spec.horizon = detail::parse_int(name, value);
  else if (name == "runs") spec.num_runs = detail::parse_int(name, value);
  else if (name == "seed") spec.base_seed = static_cast<std::uint64_t>(detail::parse_int(name, value));
  else if (name == "workers") spec.workers = static_cast<unsigned>(detail::parse_int(name, value));
  else if (name == "log_steps") spec.log_steps = detail::parse_bool(name, value);
  else if (name == "timing") spec.record_wall_clock = detail::parse_bool(name, value);
  else throw std::invalid_argument("unrecognized parameter '" + std::string(name) + "'");
}

/// Reads `key = value` lines ('#' starts a comment) into `spec`.
inline void apply_config_stream(ExperimentSpec& spec, std::istream& in, std::string_view source) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (detail::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(std::string(source) + ":" + std::to_string(line_no) +
                                  ": expected key = value");
    try {
      set_parameter(spec, detail::trim(std::string_view(line).substr(0, eq)),
                    detail::trim(std::string_view(line).substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string(source) + ":" + std::to_string(line_no) + ": " +
                                  e.what());
    }
  }
}

inline void apply_config_file(ExperimentSpec& spec, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  apply_config_stream(spec, in, path);
}

// ---------------------------------------------------------------------------
// Single runs
// ---------------------------------------------------------------------------

namespace detail {

struct RunTracker {
  RunResult result;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  RunTracker(const TabularMDP& mdp, std::uint64_t seed, std::int64_t horizon, bool log) {
    result.seed = seed;
    result.final_counts = CountMatrix(mdp.num_states());
    result.first_visit.assign(mdp.num_states(), -1);
    if (log) result.reward_log.emplace().reserve(static_cast<Index>(horizon));
  }

  void start(Index s) { result.first_visit[s] = 0; }

  void step(std::int64_t t, const TransitionSample& sample) {
    result.cumulative_reward += sample.reward;
    if (result.reward_log) result.reward_log->push_back(sample.reward);
    ++result.final_counts(sample.state, sample.next_state);
    if (result.first_visit[sample.next_state] < 0) result.first_visit[sample.next_state] = t + 1;
  }

  RunResult finish() {
    result.wall_clock_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
            .count();
    return std::move(result);
  }
};

}  // namespace detail

inline RunResult run_essr(const TabularMDP& mdp, const AgentConfig& config, std::int64_t horizon,
                          std::uint64_t seed, bool log_steps = false) {
  detail::RunTracker tracker(mdp, seed, horizon, log_steps);
  Rng rng(seed);
  EssrAgent agent(mdp, config);
  agent.start_episode(rng);
  Index s = sample_start_state(mdp, rng);
  tracker.start(s);
  for (std::int64_t t = 0; t < horizon; ++t) {
    const auto sample = sample_transition(mdp, s, agent.act(s), rng);
    tracker.step(t, sample);
    agent.observe(sample);
    s = sample.next_state;
  }
  auto out = tracker.finish();
  out.cumulative_augmented_reward = out.cumulative_reward;
  return out;
}

inline RunResult run_random(const TabularMDP& mdp, std::int64_t horizon, std::uint64_t seed,
                            bool log_steps = false) {
  detail::RunTracker tracker(mdp, seed, horizon, log_steps);
  Rng rng(seed);
  Index s = sample_start_state(mdp, rng);
  tracker.start(s);
  for (std::int64_t t = 0; t < horizon; ++t) {
    const auto a = static_cast<Index>(rng.below(mdp.num_actions()));
    const auto sample = sample_transition(mdp, s, a, rng);
    tracker.step(t, sample);
    s = sample.next_state;
  }
  auto out = tracker.finish();
  out.cumulative_augmented_reward = out.cumulative_reward;
  return out;
}

inline RunResult run_agent(const TabularMDP& mdp, AgentKind agent, const AgentConfig& config,
                           std::int64_t horizon, std::uint64_t seed, bool log_steps = false) {
  switch (agent) {
    case AgentKind::essr: return run_essr(mdp, config, horizon, seed, log_steps);
    case AgentKind::sf_q: return sf_q_agent_run(mdp, config, horizon, seed, log_steps);
    case AgentKind::baseline_random: return run_random(mdp, horizon, seed, log_steps);
  }
  throw std::invalid_argument("unknown agent");
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

struct AggregateReport {
  ExperimentSpec spec;
  std::vector<RunResult> runs;  ///< in run-index order
  double mean = 0.0;
  /// Sample standard deviation; undefined for a single run.
  std::optional<double> stddev;
  /// 1.96 * stddev / sqrt(runs).
  std::optional<double> ci95;

  std::vector<double> values() const {
    std::vector<double> v;
    v.reserve(runs.size());
    for (const auto& r : runs) v.push_back(r.cumulative_reward);
    return v;
  }
};

/// Fills mean, stddev and ci95 from the per-run cumulative rewards.
inline void summarize(AggregateReport& report) {
  const auto v = report.values();
  const auto n = static_cast<double>(v.size());
  double sum = 0.0;
  for (double x : v) sum += x;
  report.mean = v.empty() ? 0.0 : sum / n;
  report.stddev.reset();
  report.ci95.reset();
  if (v.size() < 2) return;
  double ss = 0.0;
  for (double x : v) ss += (x - report.mean) * (x - report.mean);
  report.stddev = std::sqrt(ss / (n - 1.0));
  report.ci95 = 1.96 * *report.stddev / std::sqrt(n);
}

/// Runs spec.num_runs independent runs, run i seeded with base_seed + i, on
/// up to spec.workers threads. Results are stored by run index, so the
/// report does not depend on scheduling.
inline AggregateReport run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const TabularMDP mdp = make_environment(spec.environment);

  AggregateReport report;
  report.spec = spec;
  report.runs.resize(static_cast<Index>(spec.num_runs));

  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::int64_t i = next++; i < spec.num_runs; i = next++) {
      try {
        auto r = run_agent(mdp, spec.agent, spec.config, spec.horizon,
                           run_seed(spec.base_seed, static_cast<std::uint64_t>(i)), spec.log_steps);
        if (!spec.record_wall_clock) r.wall_clock_ms = 0.0;
        report.runs[static_cast<Index>(i)] = std::move(r);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const auto threads =
      static_cast<unsigned>(std::min<std::int64_t>(spec.workers, spec.num_runs));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  summarize(report);
  return report;
}

/// One experiment per value of `parameter`.
inline std::vector<AggregateReport> sweep(const ExperimentSpec& spec, std::string_view parameter,
                                          const std::vector<std::string>& values) {
  if (values.empty()) throw std::invalid_argument("sweep needs at least one value");
  if (std::find(parameter_names().begin(), parameter_names().end(), parameter) ==
      parameter_names().end())
    throw std::invalid_argument("unrecognized parameter '" + std::string(parameter) + "'");
  std::vector<AggregateReport> reports;
  for (const auto& value : values) {
    ExperimentSpec s = spec;
    set_parameter(s, parameter, value);
    reports.push_back(run_experiment(s));
  }
  return reports;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

enum class ReportFormat { csv, json };

inline ReportFormat parse_report_format(std::string_view text) {
  if (text == "csv") return ReportFormat::csv;
  if (text == "json") return ReportFormat::json;
  throw std::invalid_argument("unknown format '" + std::string(text) + "'");
}

/// Shortest text that round-trips the double.
inline std::string format_number(double x) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

inline nlohmann::ordered_json config_json(const ExperimentSpec& spec) {
  const auto& c = spec.config;
  nlohmann::ordered_json j;
  j["env"] = spec.environment;
  j["agent"] = std::string(to_string(spec.agent));
  j["gamma"] = c.gamma;
  j["beta"] = c.beta;
  j["eval_tolerance"] = c.eval_tolerance;
  j["scheme"] = std::string(to_string(c.counting_scheme));
  j["max_eval_sweeps"] = c.max_eval_sweeps;
  j["max_policy_iterations"] = c.max_policy_iterations;
  j["replan_interval"] = c.replan_interval;
  j["alpha"] = c.alpha;
  j["q_step_size"] = c.q_step_size;
  j["tau"] = c.tau;
  j["segment_length"] = c.segment_length;
  j["epsilon_start"] = c.epsilon_start;
  j["epsilon_end"] = c.epsilon_end;
  j["epsilon_anneal_fraction"] = c.epsilon_anneal_fraction;
  j["max_bonus"] = c.max_bonus;
  j["horizon"] = spec.horizon;
  j["runs"] = spec.num_runs;
  j["seed"] = spec.base_seed;
  return j;
}

inline std::string report_csv(const AggregateReport& report) {
  std::ostringstream out;
  out << "run_index,seed,cumulative_reward,wall_clock_ms\n";
  for (Index i = 0; i < report.runs.size(); ++i) {
    const auto& r = report.runs[i];
    out << i << ',' << r.seed << ',' << format_number(r.cumulative_reward) << ','
        << format_number(r.wall_clock_ms) << '\n';
  }
  return out.str();
}

inline nlohmann::ordered_json report_json(const AggregateReport& report) {
  nlohmann::ordered_json j;
  j["mean"] = report.mean;
  j["std"] = report.stddev ? nlohmann::ordered_json(*report.stddev) : nlohmann::ordered_json();
  j["ci95"] = report.ci95 ? nlohmann::ordered_json(*report.ci95) : nlohmann::ordered_json();
  j["runs"] = report.runs.size();
  j["config"] = config_json(report.spec);
  j["cumulative_rewards"] = report.values();
  return j;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

inline void emit_report(const AggregateReport& report, ReportFormat format,
                        const std::filesystem::path& path) {
  if (format == ReportFormat::csv)
    write_text_file(path, report_csv(report));
  else
    write_text_file(path, report_json(report).dump(2) + "\n");
}

/// One summary row per swept value: parameter,value,runs,mean,std,ci95.
/// std and ci95 are left empty when undefined.
inline std::string sweep_csv(std::string_view parameter, const std::vector<std::string>& values,
                             const std::vector<AggregateReport>& reports) {
  std::ostringstream out;
  out << "parameter,value,runs,mean,std,ci95\n";
  for (Index i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    out << parameter << ',' << values[i] << ',' << r.runs.size() << ',' << format_number(r.mean)
        << ',' << (r.stddev ? format_number(*r.stddev) : "") << ','
        << (r.ci95 ? format_number(*r.ci95) : "") << '\n';
  }
  return out.str();
}

inline nlohmann::ordered_json sweep_json(std::string_view parameter,
                                         const std::vector<std::string>& values,
                                         const std::vector<AggregateReport>& reports) {
  nlohmann::ordered_json j;
  j["parameter"] = std::string(parameter);
  j["results"] = nlohmann::ordered_json::array();
  for (Index i = 0; i < reports.size(); ++i) {
    auto entry = report_json(reports[i]);
    entry["value"] = values[i];
    j["results"].push_back(std::move(entry));
  }
  return j;
}

}  // namespace essr
