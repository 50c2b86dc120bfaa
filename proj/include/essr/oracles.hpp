#pragma once

// Brute-force references. These deliberately share no code path with the
// iterative planners they are used to check: every policy is evaluated by a
// direct linear solve.

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/LU>

#include "essr/planning.hpp"

namespace essr::oracle {

/// v_pi = (I - gamma P_pi)^{-1} r_pi.
inline Vector exact_policy_value(const TransitionModel& p, const Matrix& reward,
                                 const PolicyTable& policy, double gamma) {
  const Eigen::Index ns = reward.rows();
  Matrix p_pi(ns, ns);
  Vector r_pi(ns);
  for (Eigen::Index s = 0; s < ns; ++s) {
    const Index a = policy(static_cast<Index>(s));
    p_pi.row(s) = p[a].row(s);
    r_pi(s) = reward(s, static_cast<Eigen::Index>(a));
  }
  return (Matrix::Identity(ns, ns) - gamma * p_pi).partialPivLu().solve(r_pi);
}

struct Enumeration {
  PolicyTable best;
  Vector best_value;
  PolicyTable runner_up;
  Vector runner_up_value;
  /// max_s (v_best(s) - v_runner_up(s)); infinite when only one policy exists.
  double gap = std::numeric_limits<double>::infinity();
  std::int64_t policies = 0;
};

/// Evaluates all |A|^|S| deterministic policies. Policies are ranked by the
/// sum of their state values; an optimal policy maximizes every state at
/// once, so it also maximizes the sum.
inline Enumeration enumerate_policies(const TransitionModel& p, const Matrix& reward,
                                      double gamma) {
  const auto ns = static_cast<Index>(reward.rows());
  const Index na = p.size();
  double total = 1.0;
  for (Index s = 0; s < ns; ++s) total *= static_cast<double>(na);
  if (total > 1e7) throw std::invalid_argument("too many policies to enumerate");

  Enumeration out;
  double best_sum = -std::numeric_limits<double>::infinity();
  double second_sum = -std::numeric_limits<double>::infinity();
  PolicyTable current{std::vector<Index>(ns, 0)};
  while (true) {
    Vector v = exact_policy_value(p, reward, current, gamma);
    const double sum = v.sum();
    ++out.policies;
    if (sum > best_sum) {
      out.runner_up = out.best;
      out.runner_up_value = out.best_value;
      second_sum = best_sum;
      out.best = current;
      out.best_value = v;
      best_sum = sum;
    } else if (sum > second_sum) {
      out.runner_up = current;
      out.runner_up_value = v;
      second_sum = sum;
    }
    // Odometer increment over action vectors.
    Index s = 0;
    while (s < ns && ++current.actions[s] == na) current.actions[s++] = 0;
    if (s == ns) break;
  }
  if (out.policies > 1) out.gap = (out.best_value - out.runner_up_value).maxCoeff();
  return out;
}

/// Plain value iteration run to a tight tolerance, for optimal-policy checks
/// on known models.
inline PolicyTable value_iteration_policy(const TransitionModel& p, const Matrix& reward,
                                          double gamma, double tolerance = 1e-10) {
  Vector v = Vector::Zero(reward.rows());
  Matrix q(reward.rows(), reward.cols());
  for (int iter = 0; iter < 1'000'000; ++iter) {
    for (Index a = 0; a < p.size(); ++a)
      q.col(static_cast<Eigen::Index>(a)) =
          reward.col(static_cast<Eigen::Index>(a)) + gamma * (p[a] * v);
    const Vector next = q.rowwise().maxCoeff();
    const double change = (next - v).cwiseAbs().maxCoeff();
    v = next;
    if (change < tolerance) break;
  }
  PolicyTable policy{std::vector<Index>(static_cast<Index>(q.rows()), 0)};
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    Eigen::Index best = 0;
    q.row(s).maxCoeff(&best);
    policy.actions[static_cast<Index>(s)] = static_cast<Index>(best);
  }
  return policy;
}

}  // namespace essr::oracle
