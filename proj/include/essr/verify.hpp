#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "essr/counts.hpp"
#include "essr/oracles.hpp"
#include "essr/planning.hpp"
#include "essr/random.hpp"
#include "essr/successor.hpp"
#include "essr/td_sr.hpp"

namespace essr {

enum class VerifySuite { theorem1, sr_identities, td_convergence, oracle_equivalence };

inline std::string_view to_string(VerifySuite suite) {
  switch (suite) {
    case VerifySuite::theorem1: return "theorem1";
    case VerifySuite::sr_identities: return "sr-identities";
    case VerifySuite::td_convergence: return "td-convergence";
    case VerifySuite::oracle_equivalence: return "oracle-equivalence";
  }
  return "?";
}

inline VerifySuite parse_verify_suite(std::string_view text) {
  for (auto s : {VerifySuite::theorem1, VerifySuite::sr_identities, VerifySuite::td_convergence,
                 VerifySuite::oracle_equivalence})
    if (text == to_string(s)) return s;
  throw std::invalid_argument("unknown suite '" + std::string(text) + "'");
}

struct VerifyReport {
  VerifySuite suite = VerifySuite::theorem1;
  std::int64_t trials = 0;
  std::int64_t failures = 0;
  /// First failing instance, printable.
  std::string counterexample;
  /// Largest observed violation or error, for reporting.
  double worst = 0.0;

  bool passed() const noexcept { return failures == 0; }
};

/// Discounts exercised by the randomized suites.
inline constexpr std::array<double, 3> kVerifyGammas = {0.5, 0.9, 0.95};

// ---------------------------------------------------------------------------
// Random instance generators
// ---------------------------------------------------------------------------

/// |S| in [1, max_states], counts uniform in [0, max_count]. About one row in
/// five is zeroed so that unvisited states are exercised too.
inline CountMatrix random_count_matrix(Rng& rng, Index max_states = 8,
                                       std::int64_t max_count = 50) {
  const Index ns = 1 + static_cast<Index>(rng.below(max_states));
  CountMatrix n(ns);
  for (Index s = 0; s < ns; ++s) {
    const bool zero_row = rng.below(5) == 0;
    for (Index x = 0; x < ns; ++x)
      n(s, x) = zero_row ? 0 : static_cast<std::int64_t>(rng.below(max_count + 1));
  }
  return n;
}

/// Row-stochastic matrix with iid uniform weights; with `sparse`, each entry
/// is dropped with probability 1/2 (at least one survives per row).
inline Matrix random_stochastic_matrix(Rng& rng, Index ns, bool sparse = false) {
  Matrix p(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(ns));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j)
      p(i, j) = (sparse && rng.below(2) == 0) ? 0.0 : rng.uniform() + 1e-3;
    if (p.row(i).sum() == 0.0) p(i, static_cast<Eigen::Index>(rng.below(ns))) = 1.0;
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

inline std::string describe_counts(const CountMatrix& n, double gamma) {
  std::ostringstream out;
  out << "gamma=" << gamma << " counts (" << n.num_states() << "x" << n.num_states() << "):\n";
  for (Index s = 0; s < n.num_states(); ++s) {
    for (Index x = 0; x < n.num_states(); ++x) out << (x ? " " : "  ") << n(s, x);
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

namespace detail {

inline void record_failure(VerifyReport& report, const std::string& what) {
  if (report.failures++ == 0) report.counterexample = what;
}

inline void verify_theorem1(VerifyReport& report, std::int64_t trials, Rng& rng) {
  for (std::int64_t trial = 0; trial < trials; ++trial) {
    const double gamma = kVerifyGammas[rng.below(kVerifyGammas.size())];
    const auto n = random_count_matrix(rng);
    const auto rows = theorem1_bounds(n, gamma);
    for (Index s = 0; s < rows.size(); ++s) {
      const auto& r = rows[s];
      report.worst = std::max({report.worst, r.lower - r.chi, r.chi - r.upper});
      if (!r.holds) {
        std::ostringstream out;
        out << "trial " << trial << ", state " << s << ": " << r.lower << " <= " << r.chi
            << " <= " << r.upper << " violated\n"
            << describe_counts(n, gamma);
        record_failure(report, out.str());
        break;
      }
    }
    const auto d = decompose_ptilde(n);
    if (d.reconstruction_error() > 1e-12) {
      record_failure(report, "trial " + std::to_string(trial) +
                                 ": P~ != (I - N) P^ on visited rows\n" +
                                 describe_counts(n, gamma));
    }
  }
}

inline void verify_sr_identities(VerifyReport& report, std::int64_t trials, Rng& rng) {
  constexpr double kNeumannTolerance = 1e-8;
  for (std::int64_t trial = 0; trial < trials; ++trial) {
    const double gamma = kVerifyGammas[rng.below(kVerifyGammas.size())];
    const Index ns = 1 + static_cast<Index>(rng.below(8));
    const Matrix p = random_stochastic_matrix(rng, ns, rng.below(2) == 0);

    const auto exact = exact_sr(p, gamma);
    const double expected_row = 1.0 / (1.0 - gamma);
    for (Eigen::Index s = 0; s < exact.values.rows(); ++s) {
      const double err = std::abs(exact.values.row(s).sum() - expected_row);
      report.worst = std::max(report.worst, err);
      if (err > 1e-9 || (exact.values.row(s).array() < -1e-12).any()) {
        std::ostringstream out;
        out << "trial " << trial << ": row " << s << " of the SR is negative or sums to "
            << exact.values.row(s).sum() << ", expected " << expected_row << "\nP =\n"
            << format_matrix(p, 17);
        record_failure(report, out.str());
        break;
      }
    }

    const auto series = neumann_sr(p, gamma, kNeumannTolerance);
    const double gap = (series.values - exact.values).cwiseAbs().maxCoeff();
    if (gap > kNeumannTolerance) {
      std::ostringstream out;
      out << "trial " << trial << ": Neumann series differs from direct solve by " << gap
          << "\nP =\n"
          << format_matrix(p, 17);
      record_failure(report, out.str());
    }

    // Underestimation: Psi~ <= Psi^ entrywise on visited rows.
    const auto n = random_count_matrix(rng);
    const auto d = decompose_ptilde(n);
    const auto ssr = exact_sr(d.p_tilde, gamma, SrVariant::substochastic);
    const auto emp = exact_sr(d.p_hat, gamma, SrVariant::empirical);
    for (Eigen::Index s = 0; s < ssr.values.rows(); ++s) {
      if (!d.visited[static_cast<Index>(s)]) continue;
      const double excess = (ssr.values.row(s) - emp.values.row(s)).maxCoeff();
      if (excess > 1e-12) {
        std::ostringstream out;
        out << "trial " << trial << ": SSR exceeds empirical SR by " << excess << " in row " << s
            << '\n'
            << describe_counts(n, gamma);
        record_failure(report, out.str());
        break;
      }
    }
  }
}

inline void verify_td_convergence(VerifyReport& report, std::int64_t trials, Rng& rng) {
  constexpr Index kStates = 5;
  constexpr double kTarget = 1e-6;
  const auto features = FeatureMap::tabular(kStates);
  for (std::int64_t trial = 0; trial < trials; ++trial) {
    const double gamma = kVerifyGammas[rng.below(kVerifyGammas.size())];

    // Ergodic chain: every entry positive.
    const Matrix p = random_stochastic_matrix(rng, kStates, false);
    const auto closed = closed_form_sf(p, features, gamma);
    SuccessorFeatureTable table(kStates, kStates, gamma, 0.5);
    double err = 1.0;
    for (int sweep = 0; sweep < 20'000 && err > kTarget; ++sweep) {
      for (Index s = 0; s < kStates; ++s) expected_td_update_sf(table, s, p, features);
      err = (table.psi - closed.values).cwiseAbs().maxCoeff();
    }
    report.worst = std::max(report.worst, err);
    if (err > kTarget) {
      std::ostringstream out;
      out << "trial " << trial << ": cyclic sweeps stalled at error " << err << "\nP =\n"
          << format_matrix(p, 17);
      record_failure(report, out.str());
    }

    // Deterministic chain from zero: never above the fixed point.
    std::vector<Index> next(kStates);
    Matrix det = Matrix::Zero(kStates, kStates);
    for (Index s = 0; s < kStates; ++s) {
      next[s] = static_cast<Index>(rng.below(kStates));
      det(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(next[s])) = 1.0;
    }
    const double alpha = 0.05 + 0.95 * rng.uniform();
    const auto target = closed_form_sf(det, features, gamma);
    SuccessorFeatureTable online(kStates, kStates, gamma, alpha);
    for (int step = 0; step < 2'000; ++step) {
      const auto s = static_cast<Index>(rng.below(kStates));
      td_update_sf(online, s, next[s], features);
      const double over = (online.psi - target.values).maxCoeff();
      if (over > 1e-12) {
        std::ostringstream out;
        out << "trial " << trial << ", step " << step << ": psi exceeds the closed form by "
            << over << " (alpha=" << alpha << ", gamma=" << gamma << ")\nP =\n"
            << format_matrix(det, 3);
        record_failure(report, out.str());
        break;
      }
    }
  }
}

inline void verify_oracle_equivalence(VerifyReport& report, std::int64_t trials, Rng& rng) {
  constexpr Index kStates = 4;
  constexpr Index kActions = 2;
  for (std::int64_t trial = 0; trial < trials; ++trial) {
    AgentConfig config;
    config.gamma = kVerifyGammas[rng.below(kVerifyGammas.size())];
    TransitionModel p;
    for (Index a = 0; a < kActions; ++a)
      p.push_back(random_stochastic_matrix(rng, kStates, rng.below(2) == 0));
    Matrix reward(kStates, kActions);
    for (Eigen::Index s = 0; s < reward.rows(); ++s)
      for (Eigen::Index a = 0; a < reward.cols(); ++a) reward(s, a) = 10.0 * rng.uniform() - 5.0;

    const auto solved = policy_iteration(p, reward, config);
    const auto truth = oracle::enumerate_policies(p, reward, config.gamma);
    const Vector achieved = oracle::exact_policy_value(p, reward, solved.policy, config.gamma);
    const double slack = 2.0 * config.eval_tolerance / (1.0 - config.gamma);
    const double shortfall = (truth.best_value - achieved).maxCoeff();
    report.worst = std::max(report.worst, shortfall);
    const bool value_ok = shortfall <= slack;
    const bool policy_ok = truth.gap <= slack || solved.policy == truth.best;
    if (!value_ok || !policy_ok) {
      std::ostringstream out;
      out << "trial " << trial << ": policy iteration falls short of the best policy by "
          << shortfall << " (slack " << slack << ", gap to runner-up " << truth.gap
          << ", gamma " << config.gamma << ")\nreward =\n"
          << format_matrix(reward, 17);
      for (Index a = 0; a < kActions; ++a)
        out << "P[" << a << "] =\n" << format_matrix(p[a], 17);
      record_failure(report, out.str());
    }
  }
}

}  // namespace detail

/// Runs a randomized property suite. Instances are drawn from `seed`, so a
/// reported counterexample can be regenerated.
inline VerifyReport verify(VerifySuite suite, std::int64_t trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("trials must be at least 1");
  VerifyReport report;
  report.suite = suite;
  report.trials = trials;
  Rng rng(seed);
  switch (suite) {
    case VerifySuite::theorem1: detail::verify_theorem1(report, trials, rng); break;
    case VerifySuite::sr_identities: detail::verify_sr_identities(report, trials, rng); break;
    case VerifySuite::td_convergence: detail::verify_td_convergence(report, trials, rng); break;
    case VerifySuite::oracle_equivalence:
      detail::verify_oracle_equivalence(report, trials, rng);
      break;
  }
  return report;
}

}  // namespace essr
