#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "essr/random.hpp"

namespace essr {

using Index = std::size_t;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Tolerance on probability sums for a valid MDP.
inline constexpr double kStochasticTolerance = 1e-12;

/// One outcome of taking `action` in `state`.
struct Transition {
  Index state = 0;
  Index action = 0;
  Index next_state = 0;
  double probability = 0.0;
  double reward = 0.0;
};

/// (S_t, A_t, R_{t+1}, S_{t+1})
struct TransitionSample {
  Index state = 0;
  Index action = 0;
  double reward = 0.0;
  Index next_state = 0;
};

/**
 * A finite MDP given as a list of transition tuples.
 *
 * Rewards live on (s, a, s') tuples. Tuples for the same (s, a) keep the
 * order in which they were supplied; sampling walks them in that order.
 * The constructor validates every invariant and throws std::invalid_argument
 * on violation.
 */
class TabularMDP {
 public:
  TabularMDP(std::string name, Index num_states, Index num_actions,
             std::vector<Transition> transitions, std::vector<double> start_distribution)
      : name_(std::move(name)),
        num_states_(num_states),
        num_actions_(num_actions),
        transitions_(std::move(transitions)),
        start_(std::move(start_distribution)) {
    if (num_states_ == 0) throw std::invalid_argument("MDP needs at least one state");
    if (num_actions_ == 0) throw std::invalid_argument("MDP needs at least one action");
    if (start_.size() != num_states_)
      throw std::invalid_argument("start distribution length does not match number of states");

    for (const auto& t : transitions_) {
      if (t.state >= num_states_ || t.next_state >= num_states_ || t.action >= num_actions_)
        throw std::invalid_argument("transition index out of range: " + describe(t));
      if (!(t.probability >= 0.0 && t.probability <= 1.0))
        throw std::invalid_argument("transition probability outside [0,1]: " + describe(t));
      if (!std::isfinite(t.reward))
        throw std::invalid_argument("transition reward is not finite: " + describe(t));
    }

    std::stable_sort(transitions_.begin(), transitions_.end(),
                     [](const Transition& a, const Transition& b) {
                       return a.state != b.state ? a.state < b.state : a.action < b.action;
                     });
    offsets_.assign(num_states_ * num_actions_ + 1, 0);
    for (const auto& t : transitions_) ++offsets_[t.state * num_actions_ + t.action + 1];
    std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());

    for (Index s = 0; s < num_states_; ++s) {
      for (Index a = 0; a < num_actions_; ++a) {
        double total = 0.0;
        for (const auto& t : outcomes(s, a)) total += t.probability;
        if (std::abs(total - 1.0) > kStochasticTolerance) {
          std::ostringstream msg;
          msg << "probabilities for (state " << s << ", action " << a << ") sum to "
              << std::setprecision(17) << total << " in MDP '" << name_ << "'";
          throw std::invalid_argument(msg.str());
        }
      }
    }

    double start_total = 0.0;
    for (double p : start_) {
      if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("start probability outside [0,1]");
      start_total += p;
    }
    if (std::abs(start_total - 1.0) > kStochasticTolerance)
      throw std::invalid_argument("start distribution does not sum to 1");
  }

  const std::string& name() const noexcept { return name_; }
  Index num_states() const noexcept { return num_states_; }
  Index num_actions() const noexcept { return num_actions_; }
  std::span<const Transition> transitions() const noexcept { return transitions_; }
  std::span<const double> start_distribution() const noexcept { return start_; }

  /// Tuples for (state, action), in stored order.
  std::span<const Transition> outcomes(Index state, Index action) const {
    check_indices(state, action);
    const Index k = state * num_actions_ + action;
    return std::span<const Transition>(transitions_).subspan(offsets_[k],
                                                            offsets_[k + 1] - offsets_[k]);
  }

  /// Dense |S|x|S| matrix of p(.|s, action).
  Matrix transition_matrix(Index action) const {
    check_indices(0, action);
    Matrix p = Matrix::Zero(num_states_, num_states_);
    for (const auto& t : transitions_)
      if (t.action == action) p(t.state, t.next_state) += t.probability;
    return p;
  }

  std::vector<Matrix> transition_matrices() const {
    std::vector<Matrix> out;
    out.reserve(num_actions_);
    for (Index a = 0; a < num_actions_; ++a) out.push_back(transition_matrix(a));
    return out;
  }

  /// |S|x|A| matrix of r(s,a) = sum_{s'} p(s'|s,a) r(s,a,s').
  Matrix expected_reward() const {
    Matrix r = Matrix::Zero(num_states_, num_actions_);
    for (const auto& t : transitions_) r(t.state, t.action) += t.probability * t.reward;
    return r;
  }

  void check_indices(Index state, Index action) const {
    if (state >= num_states_)
      throw std::out_of_range("state " + std::to_string(state) + " out of range for MDP '" +
                              name_ + "'");
    if (action >= num_actions_)
      throw std::out_of_range("action " + std::to_string(action) + " out of range for MDP '" +
                              name_ + "'");
  }

 private:
  static std::string describe(const Transition& t) {
    std::ostringstream out;
    out << "(" << t.state << ", " << t.action << ", " << t.next_state << ", " << t.probability
        << ", " << t.reward << ")";
    return out.str();
  }

  std::string name_;
  Index num_states_;
  Index num_actions_;
  std::vector<Transition> transitions_;
  std::vector<double> start_;
  std::vector<Index> offsets_;
};

// ---------------------------------------------------------------------------
// Environment definition files
//
//   # comment (anywhere; blank lines ignored)
//   mdp <name>
//   states <num_states>
//   actions <num_actions>
//   start <state>:<probability> [<state>:<probability> ...]
//   <state> <action> <next_state> <probability> <reward>
//   ...
//
// The four header directives must precede the first tuple line.
// ---------------------------------------------------------------------------

inline TabularMDP parse_mdp(std::istream& in, std::string_view source = "<stream>") {
  std::string name;
  Index num_states = 0;
  Index num_actions = 0;
  std::vector<double> start;
  bool have_start = false;
  std::vector<Transition> tuples;

  auto fail = [&](std::size_t line_no, const std::string& what) -> void {
    throw std::invalid_argument(std::string(source) + ":" + std::to_string(line_no) + ": " + what);
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string head;
    if (!(fields >> head)) continue;

    if (head == "mdp") {
      if (!(fields >> name)) fail(line_no, "expected a name after 'mdp'");
    } else if (head == "states") {
      if (!(fields >> num_states) || num_states == 0) fail(line_no, "bad state count");
    } else if (head == "actions") {
      if (!(fields >> num_actions) || num_actions == 0) fail(line_no, "bad action count");
    } else if (head == "start") {
      if (num_states == 0) fail(line_no, "'start' must follow 'states'");
      start.assign(num_states, 0.0);
      std::string entry;
      while (fields >> entry) {
        const auto colon = entry.find(':');
        if (colon == std::string::npos) fail(line_no, "start entries are <state>:<probability>");
        try {
          const auto s = static_cast<Index>(std::stoull(entry.substr(0, colon)));
          const double p = std::stod(entry.substr(colon + 1));
          if (s >= num_states) fail(line_no, "start state out of range");
          start[s] += p;
        } catch (const std::logic_error&) {
          fail(line_no, "malformed start entry '" + entry + "'");
        }
      }
      have_start = true;
    } else {
      if (name.empty() || num_states == 0 || num_actions == 0 || !have_start)
        fail(line_no, "header (mdp, states, actions, start) must precede transitions");
      std::istringstream tuple(line);
      Transition t;
      long long s = -1, a = -1, next = -1;
      if (!(tuple >> s >> a >> next >> t.probability >> t.reward))
        fail(line_no, "expected 'state action next_state probability reward'");
      std::string extra;
      if (tuple >> extra) fail(line_no, "trailing field '" + extra + "'");
      if (s < 0 || a < 0 || next < 0) fail(line_no, "negative index");
      t.state = static_cast<Index>(s);
      t.action = static_cast<Index>(a);
      t.next_state = static_cast<Index>(next);
      tuples.push_back(t);
    }
  }
  if (name.empty() || num_states == 0 || num_actions == 0 || !have_start)
    throw std::invalid_argument(std::string(source) + ": incomplete header");
  return TabularMDP(std::move(name), num_states, num_actions, std::move(tuples), std::move(start));
}

inline TabularMDP parse_mdp(std::string_view text, std::string_view source = "<string>") {
  std::istringstream in{std::string(text)};
  return parse_mdp(in, source);
}

inline TabularMDP load_mdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open environment file '" + path + "'");
  return parse_mdp(in, path);
}

/// Writes `mdp` in the environment-file format. parse_mdp(format_mdp(m)) == m.
inline std::string format_mdp(const TabularMDP& mdp) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "mdp " << mdp.name() << "\nstates " << mdp.num_states() << "\nactions "
      << mdp.num_actions() << "\nstart";
  const auto start = mdp.start_distribution();
  for (Index s = 0; s < start.size(); ++s)
    if (start[s] > 0.0) out << ' ' << s << ':' << start[s];
  out << '\n';
  for (const auto& t : mdp.transitions())
    out << t.state << ' ' << t.action << ' ' << t.next_state << ' ' << t.probability << ' '
        << t.reward << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Inverse-CDF draw over the (state, action) tuples in stored order. A draw
/// landing exactly on a cumulative boundary goes to the earlier tuple.
inline TransitionSample sample_transition(const TabularMDP& mdp, Index state, Index action,
                                          Rng& rng) {
  const auto outs = mdp.outcomes(state, action);
  const double u = rng.uniform();
  double cumulative = 0.0;
  const Transition* chosen = nullptr;
  for (const auto& t : outs) {
    if (t.probability <= 0.0) continue;
    chosen = &t;
    cumulative += t.probability;
    if (u <= cumulative) break;
  }
  // chosen is the last positive tuple if rounding left u above the total.
  return {state, action, chosen->reward, chosen->next_state};
}

inline Index sample_start_state(const TabularMDP& mdp, Rng& rng) {
  const auto start = mdp.start_distribution();
  const double u = rng.uniform();
  double cumulative = 0.0;
  Index last = 0;
  for (Index s = 0; s < start.size(); ++s) {
    if (start[s] <= 0.0) continue;
    last = s;
    cumulative += start[s];
    if (u <= cumulative) return s;
  }
  return last;
}

// ---------------------------------------------------------------------------
// Diagnostic environments
// ---------------------------------------------------------------------------

/// Deterministic k-cycle 0 -> 1 -> ... -> k-1 -> 0 with one action. The
/// closing transition (k-1 -> 0) pays `terminal_reward`; everything else pays 0.
inline TabularMDP build_diagnostic_chain(Index k, double terminal_reward = 0.0) {
  if (k == 0) throw std::invalid_argument("diagnostic chain needs k >= 1");
  std::vector<Transition> tuples;
  for (Index s = 0; s < k; ++s) {
    const Index next = (s + 1) % k;
    tuples.push_back({s, 0, next, 1.0, s + 1 == k ? terminal_reward : 0.0});
  }
  std::vector<double> start(k, 0.0);
  start[0] = 1.0;
  return TabularMDP("chain" + std::to_string(k), k, 1, std::move(tuples), std::move(start));
}

}  // namespace essr
