#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "essr/mdp.hpp"

namespace essr {

/// How the visit count n(s) is formed when building transition estimates.
enum class CountingScheme {
  /// Literal pseudo-code: n(s) sums the Laplace-initialized t(s, a, s') tensor,
  /// so every state carries |S|*|A| phantom observations.
  algorithm1,
  /// n(s) is the number of observed transitions out of s.
  definition2,
};

inline std::string_view to_string(CountingScheme scheme) {
  return scheme == CountingScheme::algorithm1 ? "algorithm1" : "definition2";
}

inline CountingScheme parse_counting_scheme(std::string_view text) {
  if (text == "algorithm1") return CountingScheme::algorithm1;
  if (text == "definition2") return CountingScheme::definition2;
  throw std::invalid_argument("unknown counting scheme '" + std::string(text) + "'");
}

/// |S|x|S| matrix of observed state-to-state transition counts n(s, s').
class CountMatrix {
 public:
  explicit CountMatrix(Index num_states) : n_(num_states), counts_(num_states * num_states, 0) {}

  Index num_states() const noexcept { return n_; }
  std::int64_t operator()(Index s, Index next) const { return counts_[s * n_ + next]; }
  std::int64_t& operator()(Index s, Index next) { return counts_[s * n_ + next]; }

  /// n(s) = sum_{s'} n(s, s').
  std::int64_t row_total(Index s) const {
    std::int64_t total = 0;
    for (Index j = 0; j < n_; ++j) total += counts_[s * n_ + j];
    return total;
  }

  std::int64_t total() const {
    std::int64_t total = 0;
    for (auto c : counts_) total += c;
    return total;
  }

  bool operator==(const CountMatrix&) const = default;

 private:
  Index n_;
  std::vector<std::int64_t> counts_;
};

/**
 * The agent's empirical world model.
 *
 * n(s, s') starts at 0, t(s, a, s') starts at 1 and every observation bumps
 * both. Rewards are running means per (s, a, s') using the post-increment t,
 * i.e. r <- ((t - 2) r + R) / (t - 1), which is the plain sample mean.
 */
class CountModel {
 public:
  CountModel(Index num_states, Index num_actions)
      : num_states_(num_states),
        num_actions_(num_actions),
        n_ss_(num_states),
        t_sas_(num_states * num_actions * num_states, 1),
        reward_mean_(num_states * num_actions * num_states, 0.0) {
    if (num_states == 0 || num_actions == 0)
      throw std::invalid_argument("count model needs positive dimensions");
  }

  explicit CountModel(const TabularMDP& mdp) : CountModel(mdp.num_states(), mdp.num_actions()) {}

  Index num_states() const noexcept { return num_states_; }
  Index num_actions() const noexcept { return num_actions_; }
  std::int64_t total_steps() const noexcept { return total_steps_; }
  const CountMatrix& state_counts() const noexcept { return n_ss_; }

  std::int64_t t(Index s, Index a, Index next) const { return t_sas_[flat(s, a, next)]; }
  double reward_mean(Index s, Index a, Index next) const { return reward_mean_[flat(s, a, next)]; }

  /// n(s, a) = sum_{x'} t(s, a, x'), phantom mass included.
  std::int64_t smoothed_action_total(Index s, Index a) const {
    std::int64_t total = 0;
    for (Index x = 0; x < num_states_; ++x) total += t_sas_[flat(s, a, x)];
    return total;
  }

  /// sum_{x', b} t(s, b, x') = n(s) + |S||A|.
  std::int64_t smoothed_state_total(Index s) const {
    return n_ss_.row_total(s) + static_cast<std::int64_t>(num_states_ * num_actions_);
  }

  void record(const TransitionSample& sample) {
    if (sample.state >= num_states_ || sample.next_state >= num_states_ ||
        sample.action >= num_actions_)
      throw std::out_of_range("transition sample index out of range");
    ++n_ss_(sample.state, sample.next_state);
    const Index k = flat(sample.state, sample.action, sample.next_state);
    const auto t_now = ++t_sas_[k];
    reward_mean_[k] = (static_cast<double>(t_now - 2) * reward_mean_[k] + sample.reward) /
                      static_cast<double>(t_now - 1);
    ++total_steps_;
  }

  bool operator==(const CountModel&) const = default;

 private:
  Index flat(Index s, Index a, Index next) const {
    return (s * num_actions_ + a) * num_states_ + next;
  }

  Index num_states_;
  Index num_actions_;
  CountMatrix n_ss_;
  std::vector<std::int64_t> t_sas_;
  std::vector<double> reward_mean_;
  std::int64_t total_steps_ = 0;
};

inline CountModel record_sample(CountModel model, const TransitionSample& sample) {
  model.record(sample);
  return model;
}

/// Per-action transition estimates plus which rows carry no data.
struct EmpiricalTransitions {
  CountingScheme scheme = CountingScheme::algorithm1;
  std::vector<Matrix> by_action;
  /// definition2 only: true for states never left, whose rows are all zero.
  std::vector<bool> unvisited;
};

/// algorithm1: P(s,a,x') = t(s,a,x') / sum_x t(s,a,x'), always a proper
/// distribution. definition2: P(s'|s) = n(s,s') / n(s), shared by every
/// action; rows of states never left stay zero and are flagged.
inline EmpiricalTransitions empirical_transition_matrix(const CountModel& model,
                                                        CountingScheme scheme) {
  const Index ns = model.num_states();
  const Index na = model.num_actions();
  EmpiricalTransitions out;
  out.scheme = scheme;
  out.unvisited.assign(ns, false);

  if (scheme == CountingScheme::algorithm1) {
    out.by_action.assign(na, Matrix::Zero(ns, ns));
    for (Index a = 0; a < na; ++a)
      for (Index s = 0; s < ns; ++s) {
        const double total = static_cast<double>(model.smoothed_action_total(s, a));
        for (Index x = 0; x < ns; ++x)
          out.by_action[a](s, x) = static_cast<double>(model.t(s, a, x)) / total;
      }
    return out;
  }

  Matrix p = Matrix::Zero(ns, ns);
  const auto& n = model.state_counts();
  for (Index s = 0; s < ns; ++s) {
    const auto total = n.row_total(s);
    if (total == 0) {
      out.unvisited[s] = true;
      continue;
    }
    for (Index x = 0; x < ns; ++x)
      p(s, x) = static_cast<double>(n(s, x)) / static_cast<double>(total);
  }
  out.by_action.assign(na, p);
  return out;
}

}  // namespace essr
