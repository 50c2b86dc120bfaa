#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "essr/counts.hpp"
#include "essr/mdp.hpp"

namespace essr {

/// Hyperparameters shared by every agent. Fields an agent does not use are
/// ignored by it.
struct AgentConfig {
  double gamma = 0.95;
  /// Exploration bonus scale.
  double beta = 100.0;
  /// Policy evaluation stops once no state value moves by this much in a sweep.
  double eval_tolerance = 0.01;
  CountingScheme counting_scheme = CountingScheme::algorithm1;
  std::int64_t max_eval_sweeps = 10'000;
  std::int64_t max_policy_iterations = 1'000;
  std::uint64_t seed = 0;
  /// Replan after every k-th observation.
  std::int64_t replan_interval = 1;

  // Successor-feature Q agent.
  double alpha = 0.1;           ///< successor-feature step size
  double q_step_size = 0.1;     ///< Q step size toward the mixed target
  double tau = 0.1;             ///< Monte-Carlo mixing weight
  std::int64_t segment_length = 500;
  double epsilon_start = 1.0;
  double epsilon_end = 0.1;
  double epsilon_anneal_fraction = 0.2;
  /// Bonus used where the successor features are still all zero.
  double max_bonus = 1.0;

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
    if (!(beta >= 0.0)) throw std::invalid_argument("beta must be nonnegative");
    if (!(eval_tolerance > 0.0)) throw std::invalid_argument("eval_tolerance must be positive");
    if (max_eval_sweeps < 1 || max_policy_iterations < 1)
      throw std::invalid_argument("iteration caps must be positive");
    if (replan_interval < 1) throw std::invalid_argument("replan_interval must be positive");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
    if (!(q_step_size > 0.0 && q_step_size <= 1.0))
      throw std::invalid_argument("q_step_size must lie in (0, 1]");
    if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0, 1]");
    if (segment_length < 1) throw std::invalid_argument("segment_length must be positive");
  }
};

/// Deterministic policy: one action per state.
struct PolicyTable {
  std::vector<Index> actions;

  Index operator()(Index s) const { return actions[s]; }
  Index size() const noexcept { return actions.size(); }
  bool operator==(const PolicyTable&) const = default;
};

struct ValueTable {
  Vector v;
  Matrix q;  ///< |S| x |A|
  std::int64_t sweeps = 0;
  bool converged = false;
};

/// Per-action |S|x|S| transition matrices.
using TransitionModel = std::vector<Matrix>;

namespace detail {

inline void check_planning_inputs(const TransitionModel& p, const Matrix& reward) {
  if (p.empty()) throw std::invalid_argument("transition model has no actions");
  const auto ns = reward.rows();
  if (static_cast<Index>(reward.cols()) != p.size())
    throw std::invalid_argument("reward matrix must be |S| x |A|");
  for (const auto& pa : p) {
    if (pa.rows() != ns || pa.cols() != ns)
      throw std::invalid_argument("transition matrix dimensions do not match reward");
    for (Eigen::Index s = 0; s < ns; ++s) {
      const double total = pa.row(s).sum();
      if (std::abs(total - 1.0) > 1e-9 || (pa.row(s).array() < 0.0).any())
        throw std::invalid_argument("transition model row " + std::to_string(s) +
                                    " is not a probability distribution");
    }
  }
  if (!reward.allFinite()) throw std::invalid_argument("reward has non-finite entries");
}

inline Matrix action_values(const TransitionModel& p, const Matrix& reward, const Vector& v,
                            double gamma) {
  Matrix q(reward.rows(), reward.cols());
  for (Index a = 0; a < p.size(); ++a) q.col(static_cast<Eigen::Index>(a)) =
      reward.col(static_cast<Eigen::Index>(a)) + gamma * (p[a] * v);
  return q;
}

inline ValueTable evaluate_checked(const TransitionModel& p, const Matrix& reward,
                                   const PolicyTable& policy, const AgentConfig& config,
                                   const Vector* warm_start) {
  const Eigen::Index ns = reward.rows();
  Matrix p_pi(ns, ns);
  Vector r_pi(ns);
  for (Eigen::Index s = 0; s < ns; ++s) {
    const Index a = policy(static_cast<Index>(s));
    p_pi.row(s) = p[a].row(s);
    r_pi(s) = reward(s, static_cast<Eigen::Index>(a));
  }

  ValueTable out;
  out.v = warm_start ? *warm_start : Vector::Zero(ns);
  Vector next(ns);
  while (out.sweeps < config.max_eval_sweeps) {
    next.noalias() = r_pi;
    next.noalias() += config.gamma * (p_pi * out.v);
    const double change = (next - out.v).cwiseAbs().maxCoeff();
    out.v.swap(next);
    ++out.sweeps;
    if (change < config.eval_tolerance) {
      out.converged = true;
      break;
    }
  }
  out.q = action_values(p, reward, out.v, config.gamma);
  return out;
}

}  // namespace detail

/// Iterative evaluation v <- r_pi + gamma P_pi v (synchronous sweeps) until
/// the max-norm change drops below eval_tolerance, starting from
/// `warm_start` when given and from zero otherwise.
inline ValueTable policy_evaluation(const TransitionModel& p, const Matrix& reward,
                                    const PolicyTable& policy, const AgentConfig& config,
                                    const Vector* warm_start = nullptr) {
  detail::check_planning_inputs(p, reward);
  if (policy.size() != static_cast<Index>(reward.rows()))
    throw std::invalid_argument("policy length does not match number of states");
  for (Index a : policy.actions)
    if (a >= p.size()) throw std::invalid_argument("policy action out of range");
  if (warm_start && warm_start->size() != reward.rows())
    throw std::invalid_argument("warm start has the wrong length");
  return detail::evaluate_checked(p, reward, policy, config, warm_start);
}

/// Greedy policy; ties go to the lowest action index.
inline PolicyTable policy_improvement(const Matrix& q) {
  PolicyTable policy{std::vector<Index>(static_cast<Index>(q.rows()), 0)};
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < q.cols(); ++a)
      if (q(s, a) > q(s, best)) best = a;
    policy.actions[static_cast<Index>(s)] = static_cast<Index>(best);
  }
  return policy;
}

struct PolicyIterationResult {
  PolicyTable policy;
  ValueTable values;
  std::int64_t iterations = 0;
  bool hit_iteration_cap = false;
};

/**
 * Alternates evaluation and greedy improvement until the policy is stable.
 *
 * A state keeps its current action unless another action is strictly
 * better, which keeps approximate evaluations from flipping between tied
 * actions; the result is still greedy with respect to its own evaluation.
 * Evaluations are warm-started from the previous one.
 */
inline PolicyIterationResult policy_iteration(const TransitionModel& p, const Matrix& reward,
                                              const AgentConfig& config,
                                              const PolicyTable* initial_policy = nullptr,
                                              const Vector* warm_start = nullptr) {
  detail::check_planning_inputs(p, reward);
  const auto ns = static_cast<Index>(reward.rows());
  PolicyIterationResult out;
  out.policy = initial_policy ? *initial_policy : PolicyTable{std::vector<Index>(ns, 0)};
  if (out.policy.size() != ns) throw std::invalid_argument("initial policy has the wrong length");
  for (Index a : out.policy.actions)
    if (a >= p.size()) throw std::invalid_argument("policy action out of range");
  if (warm_start && static_cast<Index>(warm_start->size()) != ns)
    throw std::invalid_argument("warm start has the wrong length");

  Vector v = warm_start ? *warm_start : Vector::Zero(static_cast<Eigen::Index>(ns));
  while (true) {
    out.values = detail::evaluate_checked(p, reward, out.policy, config, &v);
    v = out.values.v;
    ++out.iterations;

    bool changed = false;
    const Matrix& q = out.values.q;
    for (Index s = 0; s < ns; ++s) {
      const auto row = static_cast<Eigen::Index>(s);
      Index best = out.policy(s);
      for (Index a = 0; a < p.size(); ++a)
        if (q(row, static_cast<Eigen::Index>(a)) > q(row, static_cast<Eigen::Index>(best)))
          best = a;
      if (best != out.policy(s)) {
        out.policy.actions[s] = best;
        changed = true;
      }
    }
    if (!changed) break;
    if (out.iterations >= config.max_policy_iterations) {
      out.hit_iteration_cap = true;
      break;
    }
  }
  return out;
}

}  // namespace essr
