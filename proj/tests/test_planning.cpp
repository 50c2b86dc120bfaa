#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "essr/environments.hpp"
#include "essr/essr_agent.hpp"
#include "essr/oracles.hpp"
#include "essr/planning.hpp"
#include "essr/verify.hpp"

using namespace essr;
using Catch::Approx;

namespace {

AgentConfig config_with_gamma(double gamma) {
  AgentConfig c;
  c.gamma = gamma;
  return c;
}

TransitionModel two_cycle_model() {
  Matrix p(2, 2);
  p << 0, 1, 1, 0;
  return {p};
}

}  // namespace

TEST_CASE("policy_evaluation") {
  SECTION("single state, reward 1, gamma 0.5") {
    const TransitionModel p = {Matrix::Ones(1, 1)};
    const auto v = policy_evaluation(p, Matrix::Ones(1, 1), PolicyTable{{0}}, config_with_gamma(0.5));
    CHECK(v.converged);
    CHECK(std::abs(v.v(0) - 2.0) < 0.01);
  }
  SECTION("zero reward converges after one sweep") {
    const auto v = policy_evaluation(two_cycle_model(), Matrix::Zero(2, 1), PolicyTable{{0, 0}},
                                     config_with_gamma(0.9));
    CHECK(v.sweeps == 1);
    CHECK(v.v == Vector::Zero(2));
  }
  SECTION("two-cycle with rewards (1, 0)") {
    Matrix r(2, 1);
    r << 1, 0;
    const auto v = policy_evaluation(two_cycle_model(), r, PolicyTable{{0, 0}}, config_with_gamma(0.5));
    CHECK(std::abs(v.v(0) - 4.0 / 3.0) < 0.01);
    CHECK(std::abs(v.v(1) - 2.0 / 3.0) < 0.01);
    // q agrees with the one-step lookahead on the returned v.
    CHECK(v.q(0, 0) == Approx(1.0 + 0.5 * v.v(1)));
  }
  SECTION("warm start at the fixed point needs one sweep") {
    Matrix r(2, 1);
    r << 1, 0;
    Vector exact(2);
    exact << 4.0 / 3.0, 2.0 / 3.0;
    const auto v = policy_evaluation(two_cycle_model(), r, PolicyTable{{0, 0}},
                                     config_with_gamma(0.5), &exact);
    CHECK(v.sweeps == 1);
  }
  SECTION("rejects non-stochastic models and bad policies") {
    TransitionModel bad = {Matrix::Constant(2, 2, 0.4)};
    CHECK_THROWS_AS(policy_evaluation(bad, Matrix::Zero(2, 1), PolicyTable{{0, 0}}, AgentConfig{}),
                    std::invalid_argument);
    CHECK_THROWS_AS(policy_evaluation(two_cycle_model(), Matrix::Zero(2, 1), PolicyTable{{0, 1}},
                                      AgentConfig{}),
                    std::invalid_argument);
  }
}

TEST_CASE("policy_improvement") {
  Matrix q(3, 2);
  q << 0, 1,  //
      1, 1,   //
      2, -1;
  const auto pi = policy_improvement(q);
  CHECK(pi(0) == 1);
  CHECK(pi(1) == 0);
  CHECK(pi(2) == 0);
}

TEST_CASE("greedy improvement on a solved model matches enumeration") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    TransitionModel p = {random_stochastic_matrix(rng, 3), random_stochastic_matrix(rng, 3)};
    Matrix r(3, 2);
    for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = rng.uniform();
    const auto truth = oracle::enumerate_policies(p, r, 0.5);
    // One improvement step from the optimal value recovers an optimal policy.
    const Matrix q = detail::action_values(p, r, truth.best_value, 0.5);
    const auto pi = policy_improvement(q);
    const Vector v = oracle::exact_policy_value(p, r, pi, 0.5);
    REQUIRE((truth.best_value - v).maxCoeff() <= 1e-9);
  }
}

TEST_CASE("policy_iteration") {
  SECTION("a dominant action is found quickly") {
    const auto mdp = build_riverswim();
    Matrix r = Matrix::Zero(6, 2);
    r.col(1).setConstant(1.0);
    const auto result = policy_iteration(mdp.transition_matrices(), r, config_with_gamma(0.9));
    for (Index s = 0; s < 6; ++s) CHECK(result.policy(s) == 1);
    CHECK(result.iterations <= 2);
    CHECK_FALSE(result.hit_iteration_cap);
  }
  SECTION("random 4-state MDPs match exhaustive enumeration") {
    Rng rng(404);
    for (int trial = 0; trial < 200; ++trial) {
      const auto config = config_with_gamma(kVerifyGammas[rng.below(3)]);
      TransitionModel p = {random_stochastic_matrix(rng, 4, true),
                           random_stochastic_matrix(rng, 4, true)};
      Matrix r(4, 2);
      for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = 10.0 * rng.uniform() - 5.0;
      const auto result = policy_iteration(p, r, config);
      const auto truth = oracle::enumerate_policies(p, r, config.gamma);
      CHECK(truth.policies == 16);
      const Vector achieved = oracle::exact_policy_value(p, r, result.policy, config.gamma);
      REQUIRE((truth.best_value - achieved).maxCoeff() <=
              2.0 * config.eval_tolerance / (1.0 - config.gamma));
    }
  }
  SECTION("true RiverSwim model without a bonus: always swim right") {
    const auto mdp = build_riverswim();
    const auto config = config_with_gamma(0.95);
    const auto p = mdp.transition_matrices();
    const auto result = policy_iteration(p, mdp.expected_reward(), config);
    const auto reference = oracle::value_iteration_policy(p, mdp.expected_reward(), 0.95);
    CHECK(result.policy == reference);
    for (Index s = 0; s < 6; ++s) CHECK(result.policy(s) == 1);
  }
  SECTION("iteration cap is reported") {
    auto config = config_with_gamma(0.9);
    config.max_policy_iterations = 1;
    const auto mdp = build_riverswim();
    const auto result = policy_iteration(mdp.transition_matrices(), mdp.expected_reward(), config);
    CHECK(result.hit_iteration_cap);
  }
}

TEST_CASE("derived_reward_model") {
  SECTION("one observation with reward 5") {
    CountModel model(2, 1);
    model.record({0, 0, 5.0, 1});
    const Matrix r = derived_reward_model(model);
    CHECK(r(0, 0) == Approx(10.0 / 3.0).epsilon(1e-15));
    CHECK(r(1, 0) == 0.0);
  }
  SECTION("no observations") {
    CHECK(derived_reward_model(CountModel(3, 2)) == Matrix::Zero(3, 2));
  }
  SECTION("converges to the true expected reward") {
    // Outcome probabilities 0.2/0.3/0.5 with rewards 1.0/1.1/1.2: mean 1.13,
    // reward sd 0.078, so 1e-3 is four standard errors at 10^5 samples.
    const TabularMDP mdp("three", 3, 1,
                         {{0, 0, 0, 0.2, 1.0}, {0, 0, 1, 0.3, 1.1}, {0, 0, 2, 0.5, 1.2},
                          {1, 0, 1, 1.0, 0.0}, {2, 0, 2, 1.0, 0.0}},
                         {1, 0, 0});
    CountModel model(mdp);
    Rng rng(2718);
    for (int i = 0; i < 100'000; ++i) model.record(sample_transition(mdp, 0, 0, rng));
    CHECK(std::abs(derived_reward_model(model)(0, 0) - 1.13) < 1e-3);
  }
}

TEST_CASE("essr agent") {
  SECTION("before any observation the bonus is -1 everywhere") {
    AgentConfig config;
    config.counting_scheme = CountingScheme::definition2;
    EssrAgent agent(4, 2, config);
    agent.replan();
    CHECK(agent.intrinsic_reward() == Vector::Constant(4, -1.0));
  }
  SECTION("heavily visited state gets the most negative bonus") {
    // 3-state chain: 0 -> 1 -> 2 -> 0, one action. Loop many times through 0 -> 1 only.
    for (auto scheme : {CountingScheme::definition2, CountingScheme::algorithm1}) {
      AgentConfig config;
      config.counting_scheme = scheme;
      EssrAgent agent(3, 1, config);
      for (int i = 0; i < 30; ++i) agent.observe({0, 0, 0.0, 1});
      agent.observe({1, 0, 0.0, 2});
      agent.observe({2, 0, 0.0, 0});
      const Vector& r = agent.intrinsic_reward();
      CHECK(r(0) < r(1));
      CHECK(r(0) < r(2));
    }
  }
  SECTION("replaying a transition log is deterministic") {
    const auto mdp = build_riverswim();
    std::vector<TransitionSample> log;
    Rng rng(17);
    Index s = 1;
    for (int i = 0; i < 10; ++i) {
      log.push_back(sample_transition(mdp, s, rng.below(2), rng));
      s = log.back().next_state;
    }
    auto replay = [&] {
      EssrAgent agent(mdp, AgentConfig{});
      for (const auto& t : log) essr_step(agent, t);
      return agent;
    };
    const auto a = replay();
    const auto b = replay();
    CHECK(a.policy() == b.policy());
    CHECK(a.model() == b.model());
    CHECK(a.values() == b.values());
  }
  SECTION("with beta = 0 on the true model the agent plans optimally") {
    const auto mdp = build_riverswim();
    auto config = config_with_gamma(0.95);
    config.beta = 0.0;
    const auto result =
        policy_iteration(mdp.transition_matrices(),
                         augmented_reward(mdp.expected_reward(), Vector::Constant(6, -3.0), 0.0),
                         config);
    for (Index s = 0; s < 6; ++s) CHECK(result.policy(s) == 1);
  }
}

TEST_CASE("a constant shift of the bonus leaves the plan unchanged") {
  const auto mdp = build_riverswim();
  Rng rng(8);
  CountModel model(mdp);
  Index s = 1;
  for (int i = 0; i < 300; ++i) {
    const auto t = sample_transition(mdp, s, rng.below(2), rng);
    model.record(t);
    s = t.next_state;
  }
  AgentConfig config;
  config.eval_tolerance = 1e-8;
  const auto p = empirical_transition_matrix(model, CountingScheme::algorithm1).by_action;
  const Vector bonus = intrinsic_reward_l1(ssr_from_counts(model, CountingScheme::algorithm1, 0.95));
  const Matrix r = derived_reward_model(model);
  const auto base = policy_iteration(p, augmented_reward(r, bonus, 100.0), config);
  for (double shift : {-50.0, -1.0, 1.95, 1000.0}) {
    const Vector shifted = bonus.array() + shift;
    const auto moved = policy_iteration(p, augmented_reward(r, shifted, 100.0), config);
    CHECK(moved.policy == base.policy);
  }
}
