#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "essr/counts.hpp"
#include "essr/mdp.hpp"
#include "essr/planning.hpp"
#include "essr/random.hpp"
#include "essr/run_result.hpp"
#include "essr/successor.hpp"

namespace essr {

/// Nonnegative state features, one row per state.
class FeatureMap {
 public:
  /// Takes `phi` as is. Throws if any entry is negative or non-finite.
  explicit FeatureMap(Matrix phi) : phi_(std::move(phi)) {
    if (!phi_.allFinite() || (phi_.array() < 0.0).any())
      throw std::invalid_argument("features must be finite and nonnegative");
  }

  /// One-hot features; already unit length.
  static FeatureMap tabular(Index num_states) {
    FeatureMap f(Matrix::Identity(static_cast<Eigen::Index>(num_states),
                                  static_cast<Eigen::Index>(num_states)));
    f.normalized_ = true;
    return f;
  }

  /// Rescales every row to unit l2 norm. Zero rows cannot be normalized.
  static FeatureMap normalized(Matrix phi) {
    for (Eigen::Index s = 0; s < phi.rows(); ++s) {
      const double norm = phi.row(s).norm();
      if (!(norm > 0.0))
        throw std::invalid_argument("cannot normalize the zero feature row of state " +
                                    std::to_string(s));
      phi.row(s) /= norm;
    }
    FeatureMap f(std::move(phi));
    f.normalized_ = true;
    return f;
  }

  const Matrix& phi() const noexcept { return phi_; }
  bool is_normalized() const noexcept { return normalized_; }
  Index num_states() const noexcept { return static_cast<Index>(phi_.rows()); }
  Index dimension() const noexcept { return static_cast<Index>(phi_.cols()); }

 private:
  Matrix phi_;
  bool normalized_ = false;
};

/// Psi = (I - gamma P)^{-1} Phi.
inline SuccessorMatrix closed_form_sf(const Matrix& p, const FeatureMap& features, double gamma) {
  detail::check_gamma(gamma);
  detail::check_substochastic(p);
  if (static_cast<Index>(p.rows()) != features.num_states())
    throw std::invalid_argument("feature map does not match the transition matrix");
  return {detail::solve_resolvent(p, gamma, features.phi()), gamma, SrVariant::features};
}

/// Tabular successor-feature estimates psi(s), zero-initialized.
struct SuccessorFeatureTable {
  Matrix psi;
  double gamma = 0.95;
  double step_size = 0.1;

  SuccessorFeatureTable(Index num_states, Index dimension, double gamma_, double step_size_)
      : psi(Matrix::Zero(static_cast<Eigen::Index>(num_states),
                         static_cast<Eigen::Index>(dimension))),
        gamma(gamma_),
        step_size(step_size_) {
    detail::check_gamma(gamma);
    if (!(step_size > 0.0 && step_size <= 1.0))
      throw std::invalid_argument("step size must lie in (0, 1]");
  }
};

/// psi(s) <- psi(s) + alpha [phi(s) + gamma psi(s') - psi(s)]. Only row s changes.
inline void td_update_sf(SuccessorFeatureTable& table, Index state, Index next_state,
                         const FeatureMap& features) {
  const auto s = static_cast<Eigen::Index>(state);
  const auto next = static_cast<Eigen::Index>(next_state);
  if (state >= static_cast<Index>(table.psi.rows()) ||
      next_state >= static_cast<Index>(table.psi.rows()))
    throw std::out_of_range("state out of range for successor-feature table");
  const Eigen::RowVectorXd error =
      features.phi().row(s) + table.gamma * table.psi.row(next) - table.psi.row(s);
  table.psi.row(s) += table.step_size * error;
}

/// Expected-update variant for convergence checks:
/// psi(s) <- psi(s) + alpha [phi(s) + gamma sum_{s'} P(s, s') psi(s') - psi(s)].
inline void expected_td_update_sf(SuccessorFeatureTable& table, Index state, const Matrix& p,
                                  const FeatureMap& features) {
  const auto s = static_cast<Eigen::Index>(state);
  const Eigen::RowVectorXd error =
      features.phi().row(s) + table.gamma * (p.row(s) * table.psi) - table.psi.row(s);
  table.psi.row(s) += table.step_size * error;
}

/// r_int = 1 / ||psi||_2. A zero row means the features have not been
/// learned yet (or have collapsed) and is reported as std::domain_error.
inline double l2_bonus(const Eigen::Ref<const Eigen::RowVectorXd>& psi_row) {
  const double norm = psi_row.norm();
  if (!(norm > 0.0)) throw std::domain_error("l2 bonus undefined for a zero successor vector");
  return 1.0 / norm;
}

struct QTable {
  Matrix q;
  /// Weight of the Monte-Carlo return in the mixed target.
  double tau = 0.1;

  QTable(Index num_states, Index num_actions, double tau_)
      : q(Matrix::Zero(static_cast<Eigen::Index>(num_states),
                       static_cast<Eigen::Index>(num_actions))),
        tau(tau_) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0, 1]");
  }
};

/// (1 - tau) * one_step + tau * monte_carlo.
inline double mix_targets(double one_step, double monte_carlo, double tau) {
  return (1.0 - tau) * one_step + tau * monte_carlo;
}

/**
 * Mixed Monte-Carlo target for the transition `t` taken at the head of
 * `augmented_suffix`.
 *
 * augmented_suffix[k] = R_{t+k} + beta r_int(S_{t+k}), from the transition
 * itself to the end of its episode; `bonus` is r_int(S_t). The suffix must
 * be complete (episode finished) whenever tau > 0.
 */
inline double mmc_target(const QTable& q, const TransitionSample& t, double bonus,
                         std::span<const double> augmented_suffix, bool suffix_complete,
                         double gamma, double beta) {
  const double one_step =
      t.reward + beta * bonus + gamma * q.q.row(static_cast<Eigen::Index>(t.next_state)).maxCoeff();
  if (q.tau == 0.0) return one_step;
  if (!suffix_complete || augmented_suffix.empty())
    throw std::invalid_argument("Monte-Carlo target needs the completed episode");
  double ret = 0.0;
  for (auto it = augmented_suffix.rbegin(); it != augmented_suffix.rend(); ++it)
    ret = *it + gamma * ret;
  return mix_targets(one_step, ret, q.tau);
}

/// Linear anneal from epsilon_start to epsilon_end over the first
/// epsilon_anneal_fraction of the horizon, constant afterwards.
inline double epsilon_at(const AgentConfig& config, std::int64_t step, std::int64_t horizon) {
  const double span = config.epsilon_anneal_fraction * static_cast<double>(horizon);
  if (span <= 0.0 || static_cast<double>(step) >= span) return config.epsilon_end;
  const double frac = static_cast<double>(step) / span;
  return config.epsilon_start + frac * (config.epsilon_end - config.epsilon_start);
}

namespace detail {

inline Index greedy_random_ties(const Matrix& q, Index state, Rng& rng) {
  const auto row = q.row(static_cast<Eigen::Index>(state));
  const double best = row.maxCoeff();
  Index ties = 0;
  for (Eigen::Index a = 0; a < row.size(); ++a) ties += row(a) == best ? 1 : 0;
  auto pick = rng.below(ties);
  for (Eigen::Index a = 0; a < row.size(); ++a)
    if (row(a) == best && pick-- == 0) return static_cast<Index>(a);
  return 0;
}

}  // namespace detail

/**
 * Tabular successor-feature agent: epsilon-greedy Q-learning on
 * R + beta / ||psi(s)||_2 with mixed Monte-Carlo targets.
 *
 * psi is TD-updated online from zero. Q updates are applied at the end of
 * each fixed-length segment, once the Monte-Carlo returns of the segment
 * are known. Returns are truncated at the segment boundary.
 */
class SfQAgent {
 public:
  SfQAgent(const TabularMDP& mdp, AgentConfig config, FeatureMap features)
      : config_(std::move(config)),
        features_(std::move(features)),
        psi_(mdp.num_states(), features_.dimension(), config_.gamma, config_.alpha),
        q_(mdp.num_states(), mdp.num_actions(), config_.tau) {
    config_.validate();
    if (features_.num_states() != mdp.num_states())
      throw std::invalid_argument("feature map does not match the environment");
    max_bonus_ = config_.max_bonus > 0.0 ? config_.max_bonus : 1.0 / config_.alpha;
  }

  SfQAgent(const TabularMDP& mdp, AgentConfig config)
      : SfQAgent(mdp, config, FeatureMap::tabular(mdp.num_states())) {}

  double bonus(Index state) const {
    const auto row = psi_.psi.row(static_cast<Eigen::Index>(state));
    return row.norm() > 0.0 ? l2_bonus(row) : max_bonus_;
  }

  Index act(Index state, double epsilon, Rng& rng) const {
    if (rng.uniform() < epsilon) return static_cast<Index>(rng.below(q_.q.cols()));
    return detail::greedy_random_ties(q_.q, state, rng);
  }

  /// Returns the augmented reward of the step.
  double observe(const TransitionSample& sample) {
    const double b = config_.beta > 0.0 ? bonus(sample.state) : 0.0;
    td_update_sf(psi_, sample.state, sample.next_state, features_);
    segment_.push_back(sample);
    bonuses_.push_back(b);
    const double augmented = sample.reward + config_.beta * b;
    augmented_.push_back(augmented);
    if (static_cast<std::int64_t>(segment_.size()) >= config_.segment_length) end_segment();
    return augmented;
  }

  /// Applies the pending Q updates in stored order.
  void end_segment() {
    const std::span<const double> aug(augmented_);
    for (Index k = 0; k < segment_.size(); ++k) {
      const auto& t = segment_[k];
      const double target =
          mmc_target(q_, t, bonuses_[k], aug.subspan(k), true, config_.gamma, config_.beta);
      double& entry = q_.q(static_cast<Eigen::Index>(t.state), static_cast<Eigen::Index>(t.action));
      entry += config_.q_step_size * (target - entry);
    }
    segment_.clear();
    bonuses_.clear();
    augmented_.clear();
  }

  const QTable& q() const noexcept { return q_; }
  const SuccessorFeatureTable& successor_features() const noexcept { return psi_; }

 private:
  AgentConfig config_;
  FeatureMap features_;
  SuccessorFeatureTable psi_;
  QTable q_;
  double max_bonus_ = 1.0;
  std::vector<TransitionSample> segment_;
  std::vector<double> bonuses_;
  std::vector<double> augmented_;
};

/// Runs SfQAgent for `steps` environment steps from a start state drawn
/// with `seed`.
inline RunResult sf_q_agent_run(const TabularMDP& mdp, const AgentConfig& config,
                                std::int64_t steps, std::uint64_t seed, bool log_steps = false) {
  if (steps < 1) throw std::invalid_argument("steps must be positive");
  const auto started = std::chrono::steady_clock::now();
  Rng rng(seed);
  SfQAgent agent(mdp, config);
  RunResult out;
  out.seed = seed;
  out.final_counts = CountMatrix(mdp.num_states());
  out.first_visit.assign(mdp.num_states(), -1);
  if (log_steps) out.reward_log.emplace().reserve(static_cast<Index>(steps));

  Index s = sample_start_state(mdp, rng);
  out.first_visit[s] = 0;
  for (std::int64_t t = 0; t < steps; ++t) {
    const Index a = agent.act(s, epsilon_at(config, t, steps), rng);
    const auto sample = sample_transition(mdp, s, a, rng);
    out.cumulative_reward += sample.reward;
    out.cumulative_augmented_reward += agent.observe(sample);
    if (out.reward_log) out.reward_log->push_back(sample.reward);
    ++out.final_counts(sample.state, sample.next_state);
    if (out.first_visit[sample.next_state] < 0) out.first_visit[sample.next_state] = t + 1;
    s = sample.next_state;
  }
  agent.end_segment();
  out.wall_clock_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return out;
}

}  // namespace essr
