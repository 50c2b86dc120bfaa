#pragma once

#include <cstdint>
#include <utility>

#include "essr/counts.hpp"
#include "essr/mdp.hpp"
#include "essr/planning.hpp"
#include "essr/random.hpp"
#include "essr/successor.hpp"

namespace essr {

/// r^(s, a) = sum_{s'} P^(s, a, s') r^(s, a, s') under the Laplace-smoothed
/// model. Unobserved (s, a, s') keep their initial mean of 0.
inline Matrix derived_reward_model(const CountModel& model) {
  const Index ns = model.num_states();
  const Index na = model.num_actions();
  Matrix r = Matrix::Zero(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(na));
  for (Index s = 0; s < ns; ++s)
    for (Index a = 0; a < na; ++a) {
      const double total = static_cast<double>(model.smoothed_action_total(s, a));
      double expected = 0.0;
      for (Index x = 0; x < ns; ++x)
        expected += static_cast<double>(model.t(s, a, x)) / total * model.reward_mean(s, a, x);
      r(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = expected;
    }
  return r;
}

/// r^(s, a) + beta * r_int(s), the state bonus broadcast over actions.
inline Matrix augmented_reward(const Matrix& reward, const Vector& state_bonus, double beta) {
  Matrix out = reward;
  out.colwise() += beta * state_bonus;
  return out;
}

/**
 * Model-based exploration through the substochastic successor
 * representation.
 *
 * Every observation updates the counts, rebuilds the smoothed model P^ and
 * the substochastic P~ (under the configured counting scheme), takes
 * r_int = -||Psi~(s)||_1 and replans by policy iteration on
 * r^ + beta * r_int.
 */
class EssrAgent {
 public:
  EssrAgent(Index num_states, Index num_actions, AgentConfig config)
      : config_(std::move(config)),
        model_(num_states, num_actions),
        policy_{std::vector<Index>(num_states, 0)},
        values_(Vector::Zero(static_cast<Eigen::Index>(num_states))),
        bonus_(Vector::Constant(static_cast<Eigen::Index>(num_states), -1.0)) {
    config_.validate();
  }

  EssrAgent(const TabularMDP& mdp, AgentConfig config)
      : EssrAgent(mdp.num_states(), mdp.num_actions(), std::move(config)) {}

  /// Draws a fresh uniformly random deterministic policy.
  void start_episode(Rng& rng) {
    for (auto& a : policy_.actions) a = static_cast<Index>(rng.below(model_.num_actions()));
  }

  Index act(Index state) const { return policy_(state); }

  void observe(const TransitionSample& sample) {
    model_.record(sample);
    if (model_.total_steps() % config_.replan_interval == 0) replan();
  }

  void replan() {
    const auto p_hat = empirical_transition_matrix(model_, CountingScheme::algorithm1);
    bonus_ = intrinsic_reward_l1(ssr_from_counts(model_, config_.counting_scheme, config_.gamma));
    const Matrix reward = augmented_reward(derived_reward_model(model_), bonus_, config_.beta);
    auto result = policy_iteration(p_hat.by_action, reward, config_, &policy_, &values_);
    policy_ = std::move(result.policy);
    values_ = std::move(result.values.v);
    last_iterations_ = result.iterations;
    ++replans_;
    if (result.hit_iteration_cap) ++iteration_cap_hits_;
  }

  const AgentConfig& config() const noexcept { return config_; }
  const CountModel& model() const noexcept { return model_; }
  const PolicyTable& policy() const noexcept { return policy_; }
  const Vector& values() const noexcept { return values_; }
  /// r_int from the most recent replan (all -1 before the first).
  const Vector& intrinsic_reward() const noexcept { return bonus_; }
  std::int64_t replans() const noexcept { return replans_; }
  std::int64_t iteration_cap_hits() const noexcept { return iteration_cap_hits_; }
  std::int64_t last_policy_iterations() const noexcept { return last_iterations_; }

 private:
  AgentConfig config_;
  CountModel model_;
  PolicyTable policy_;
  Vector values_;
  Vector bonus_;
  std::int64_t replans_ = 0;
  std::int64_t iteration_cap_hits_ = 0;
  std::int64_t last_iterations_ = 0;
};

/// One step of the agent loop: record `observation`, replan, return the new policy.
inline const PolicyTable& essr_step(EssrAgent& agent, const TransitionSample& observation) {
  agent.observe(observation);
  return agent.policy();
}

}  // namespace essr
