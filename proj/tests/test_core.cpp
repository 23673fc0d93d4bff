#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rltrans/refute.hpp"
#include "rltrans/solve.hpp"
#include "test_util.hpp"

using namespace rltrans;
using namespace testutil;

namespace {

Mdp single_state_loop(double reward_unused = 0.0) {
  (void)reward_unused;
  Mdp m;
  m.state_count = 1;
  m.action_count = 1;
  m.initial = 0;
  m.propositions = {"b"};
  m.labels = {0};
  m.rows = {{{{0, 1.0}}}};
  return m;
}

}  // namespace

TEST_CASE("validate_mdp accepts the figure MDPs and flags bad rows") {
  CHECK(validate_mdp(fig1_mdp(0.5, 0.5, 0.5)).empty());
  CHECK(validate_mdp(fig3_mdp(1, 1)).empty());
  CHECK(validate_mdp(fig4_mdp(1, 0.3)).empty());

  Mdp bad = fig1_mdp(0.5, 0.5, 0.5);
  bad.rows[0][0] = {{1, 0.5}, {3, 0.4}};  // sums to 0.9
  auto violations = validate_mdp(bad);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].check == "row-sum");
  CHECK(violations[0].state == 0);
  CHECK(violations[0].action == 0);

  Mdp negative = fig1_mdp(0.5, 0.5, 0.5);
  negative.rows[0][1] = {{2, 1.1}, {3, -0.1}};
  bool found = false;
  for (const auto& v : validate_mdp(negative))
    found = found || v.check == "probability-out-of-range";
  CHECK(found);
}

TEST_CASE("simulator follows deterministic rows and matches frequencies") {
  Mdp fig1 = fig1_mdp(1, 1, 1);
  MdpSimulator sim(fig1, 7);
  for (int i = 0; i < 50; ++i) {
    sim.reset();
    CHECK(sim.state() == 0);
    CHECK(sim.step(0) == 1);  // p1 = 1
    CHECK(sim.step(0) == 1);  // absorbing
  }
  CHECK_THROWS_AS(sim.step(5), std::out_of_range);

  // Binomial bound on the frequency of s1 under p1 = 0.3.
  Mdp m = fig1_mdp(0.3, 1, 1);
  MdpSimulator s(m, 12345);
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    s.reset();
    hits += s.step(0) == 1;
  }
  double freq = static_cast<double>(hits) / n;
  CHECK(std::fabs(freq - 0.3) <= 3.0 * std::sqrt(0.3 * 0.7 / n));
}

TEST_CASE("simulator fidelity on every row of a random MDP") {
  Rng seed_rng(99);
  Mdp m = random_mdp(seed_rng, 3, 2, 1);
  const int n = 100000;
  for (int s = 0; s < m.state_count; ++s)
    for (int a = 0; a < m.action_count; ++a) {
      Mdp from_s = m;
      from_s.initial = s;
      MdpSimulator sim(from_s, mix_seed(5, s * 2 + a));
      std::vector<int> count(m.state_count, 0);
      for (int i = 0; i < n; ++i) {
        sim.reset();
        ++count[sim.step(a)];
      }
      for (int t = 0; t < m.state_count; ++t) {
        double p = m.prob(s, a, t);
        double bound = 3.0 * std::sqrt(p * (1.0 - p) / n);
        CHECK(std::fabs(static_cast<double>(count[t]) / n - p) <= bound);
      }
    }
}

TEST_CASE("cylinder probabilities") {
  Mdp m = fig1_mdp(0.5, 1, 1);
  auto pi1 = PositionalPolicy::always(0, 4, 2);
  CHECK(cylinder_prob(m, pi1, Run{0, {}}) == 1.0);
  CHECK(cylinder_prob(m, pi1, Run{0, {{0, 1}}}) == 0.5);
  CHECK(cylinder_prob(m, pi1, Run{2, {}}) == 0.0);
  // Policy probability multiplies in.
  auto mixed = PositionalPolicy::uniform(4, 2);
  CHECK(cylinder_prob(m, mixed, Run{0, {{0, 1}}}) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("discounted policy evaluation closed forms") {
  Mdp loop = single_state_loop();
  RewardTable r(1, 1);
  r.at(0, 0, 0) = 1.0;
  auto v = discounted_value(loop, r, Discount(0.5), PositionalPolicy::always(0, 1, 1));
  CHECK(v[0] == doctest::Approx(2.0).epsilon(1e-12));

  Mdp fig1 = fig1_mdp(1, 1, 1);
  RewardTable fr(4, 2);
  fr.at(0, 0, 1) = 1.0;
  auto fv = discounted_value(fig1, fr, Discount(0.5), PositionalPolicy::always(0, 4, 2));
  CHECK(fv[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("discounted linear solve matches fixpoint iteration") {
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    Mdp m = random_mdp(rng, 4, 2, 1);
    RewardTable r = random_reward(rng, 4, 2);
    auto pol = random_stochastic_policy(rng, 4, 2);
    auto exact = discounted_value(m, r, Discount(0.9), pol);
    auto approx = vi_policy_eval(m, r, 0.9, pol, 1e-12);
    for (int s = 0; s < 4; ++s) CHECK(std::fabs(exact[s] - approx[s]) <= 1e-5);
  }
}

TEST_CASE("value iteration optimum and greedy policy") {
  // One state, two actions with rewards 0 and 1.
  Mdp m;
  m.state_count = 1;
  m.action_count = 2;
  m.initial = 0;
  m.propositions = {"b"};
  m.labels = {0};
  m.rows = {{{{0, 1.0}}, {{0, 1.0}}}};
  RewardTable r(1, 2);
  r.at(0, 1, 0) = 1.0;
  auto vp = value_iteration_discounted(m, r, Discount(0.9), 1e-9);
  CHECK(vp.value[0] == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(vp.policy.action_at(0) == 1);

  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    Mdp rm = random_mdp(rng, 5, 3, 1);
    RewardTable rr = random_reward(rng, 5, 3);
    auto opt = value_iteration_discounted(rm, rr, Discount(0.9), 1e-8);
    auto eval = discounted_value(rm, rr, Discount(0.9), opt.policy);
    for (int s = 0; s < 5; ++s)
      CHECK(std::fabs(opt.value[s] - eval[s]) <= 1e-8);
    // Bellman optimality residual of the returned value.
    for (int s = 0; s < 5; ++s) {
      double best = -1e300;
      for (int a = 0; a < 3; ++a) {
        double q = 0.0;
        for (const auto& t : rm.rows[s][a])
          q += t.prob * (rr.at(s, a, t.to) + 0.9 * opt.value[t.to]);
        best = std::max(best, q);
      }
      CHECK(std::fabs(best - opt.value[s]) <= 1e-7);
    }
  }
}

TEST_CASE("maximum reachability with progress-aware policy") {
  Mdp m = fig1_mdp(1, 1, 1);
  std::vector<char> target = {0, 1, 0, 0};
  auto vp = max_reach_prob(m, target);
  CHECK(vp.value[0] == 1.0);
  CHECK(vp.value[1] == 1.0);
  CHECK(vp.policy.action_at(0) == 0);

  Mdp m2 = fig1_mdp(0.7, 1, 1);
  auto vp2 = max_reach_prob(m2, target);
  CHECK(vp2.value[0] == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(vp2.policy.action_at(0) == 0);

  // A value-preserving self-loop must not fool the policy extraction:
  // at s0, action 0 self-loops (same backup value), action 1 moves.
  Mdp trap;
  trap.state_count = 3;
  trap.action_count = 2;
  trap.initial = 0;
  trap.propositions = {"b"};
  trap.labels = {0, 1, 0};
  trap.rows = {{{{0, 1.0}}, {{1, 0.5}, {2, 0.5}}},
               {{{1, 1.0}}, {{1, 1.0}}},
               {{{2, 1.0}}, {{2, 1.0}}}};
  auto tv = max_reach_prob(trap, {0, 1, 0});
  CHECK(tv.value[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(tv.policy.action_at(0) == 1);
}

TEST_CASE("maximum safety via sure-safety region") {
  Mdp all_safe = fig3_mdp(0.5, 0.5);
  auto v_all = max_safe_prob(all_safe, {1, 1, 1});
  for (double x : v_all.value) CHECK(x == 1.0);

  Mdp m = fig3_mdp(1, 1);
  auto vp = max_safe_prob(m, {1, 0, 1});
  CHECK(vp.value[0] == 1.0);
  CHECK(vp.policy.action_at(0) == 0);

  Mdp md = fig3_mdp(0.9, 0.9);
  auto vpd = max_safe_prob(md, {1, 0, 1});
  CHECK(vpd.value[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(vpd.policy.action_at(0) == 1);
}

TEST_CASE("reach-safe duality against an independent min-reach fixpoint") {
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    Mdp m = random_mdp(rng, 5, 2, 1);
    std::vector<char> safe(5), unsafe(5);
    for (int s = 0; s < 5; ++s) {
      safe[s] = rng.uniform() < 0.6;
      unsafe[s] = !safe[s];
    }
    auto vp = max_safe_prob(m, safe);
    auto minreach = vi_min_reach(m, unsafe);
    for (int s = 0; s < 5; ++s)
      CHECK(std::fabs(vp.value[s] - (1.0 - minreach[s])) <= 1e-7);
  }
}

TEST_CASE("limit-average values") {
  // Deterministic 2-cycle with rewards 1 then 0.
  Mdp cyc;
  cyc.state_count = 2;
  cyc.action_count = 1;
  cyc.initial = 0;
  cyc.propositions = {"b"};
  cyc.labels = {0, 0};
  cyc.rows = {{{{1, 1.0}}}, {{{0, 1.0}}}};
  RewardTable r(2, 1);
  r.at(0, 0, 1) = 1.0;
  CHECK(limit_avg_value(cyc, r, PositionalPolicy::always(0, 2, 1)) ==
        doctest::Approx(0.5).epsilon(1e-12));

  // Monte Carlo cross-check on a random chain.
  Rng rng(5150);
  Mdp m = random_mdp(rng, 5, 1, 1);
  RewardTable rr = random_reward(rng, 5, 1);
  double exact = limit_avg_value(m, rr, PositionalPolicy::always(0, 5, 1));
  MdpSimulator sim(m, 777);
  double total = 0.0;
  const long steps = 1000000;
  int s = sim.state();
  for (long i = 0; i < steps; ++i) {
    int t = sim.step(0);
    total += rr.at(s, 0, t);
    s = t;
  }
  CHECK(std::fabs(total / steps - exact) <= 0.01);
}

TEST_CASE("maximal end components") {
  Mdp loop = single_state_loop();
  auto mecs = mec_decomposition(loop);
  REQUIRE(mecs.size() == 1);
  CHECK(mecs[0].states == std::vector<int>{0});

  auto fig1 = fig1_mdp(1, 1, 1);
  auto fm = mec_decomposition(fig1);
  std::vector<std::vector<int>> sets;
  for (const auto& mec : fm) sets.push_back(mec.states);
  std::sort(sets.begin(), sets.end());
  CHECK(sets == std::vector<std::vector<int>>{{1}, {2}, {3}});

  // Two disjoint cycles joined at a transient state.
  Mdp two;
  two.state_count = 5;
  two.action_count = 2;
  two.initial = 0;
  two.propositions = {"b"};
  two.labels.assign(5, 0);
  two.rows.assign(5, std::vector<std::vector<Transition>>(2));
  two.rows[0][0] = {{1, 1.0}};
  two.rows[0][1] = {{3, 1.0}};
  for (int a = 0; a < 2; ++a) {
    two.rows[1][a] = {{2, 1.0}};
    two.rows[2][a] = {{1, 1.0}};
    two.rows[3][a] = {{4, 1.0}};
    two.rows[4][a] = {{3, 1.0}};
  }
  auto tm = mec_decomposition(two);
  CHECK(tm.size() == 2);
}

TEST_CASE("maximal end components satisfy their definitional properties") {
  Rng rng(40);
  for (int trial = 0; trial < 40; ++trial) {
    Mdp m = random_mdp(rng, 2 + static_cast<int>(rng.uniform() * 4), 2, 1);
    auto mecs = mec_decomposition(m);
    std::vector<char> seen(m.state_count, 0);
    for (const auto& mec : mecs) {
      std::vector<char> inside(m.state_count, 0);
      for (int s : mec.states) {
        CHECK_FALSE(seen[s]);  // pairwise disjoint
        seen[s] = 1;
        inside[s] = 1;
      }
      // Closed under every allowed action.
      for (std::size_t i = 0; i < mec.states.size(); ++i) {
        CHECK_FALSE(mec.allowed[i].empty());
        for (int a : mec.allowed[i])
          for (const auto& t : m.rows[mec.states[i]][a])
            if (t.prob > 0.0) CHECK(inside[t.to]);
      }
      // Strongly connected through allowed edges.
      for (int start : mec.states) {
        std::vector<char> reached(m.state_count, 0);
        std::vector<int> stack{start};
        reached[start] = 1;
        while (!stack.empty()) {
          int s = stack.back();
          stack.pop_back();
          int idx = static_cast<int>(std::find(mec.states.begin(), mec.states.end(), s) -
                                     mec.states.begin());
          for (int a : mec.allowed[idx])
            for (const auto& t : m.rows[s][a])
              if (t.prob > 0.0 && !reached[t.to]) {
                reached[t.to] = 1;
                stack.push_back(t.to);
              }
        }
        for (int s : mec.states) CHECK(reached[s]);
      }
    }
  }
}

TEST_CASE("maximum Buchi probability matches exhaustive enumeration") {
  // Accepting absorbing state reachable with probability 1.
  Mdp m = fig3_mdp(0, 0);  // a1 at s0 moves to s1 surely, a2 to s2 surely
  auto br = max_buchi_prob(m, {0, 0, 1});
  CHECK(br.value[0] == 1.0);

  Rng rng(31337);
  for (int trial = 0; trial < 25; ++trial) {
    Mdp rm = random_mdp(rng, 4, 2, 1);
    std::vector<char> accepting(4);
    for (int s = 0; s < 4; ++s) accepting[s] = rng.uniform() < 0.4;
    auto exact = max_buchi_prob(rm, accepting);
    double brute = buchi_enumeration_best(rm, accepting);
    CHECK(std::fabs(exact.value[rm.initial] - brute) <= 1e-9);
    for (double x : exact.value) {
      CHECK(x >= -1e-9);
      CHECK(x <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("multichain gain solver matches exhaustive policy enumeration") {
  Rng rng(8888);
  for (int trial = 0; trial < 30; ++trial) {
    int states = 2 + static_cast<int>(rng.uniform() * 3);
    Mdp m = random_mdp(rng, states, 2, 1);
    RewardTable r = random_reward(rng, states, 2);
    auto solved = max_gain(m, r);
    double brute = -1e300;
    for (const auto& pol : all_det_policies(states, 2))
      brute = std::max(brute, limit_avg_value(m, r, pol));
    CHECK(std::fabs(solved.value[m.initial] - brute) <= 1e-8);
    // The returned policy attains the returned value.
    CHECK(std::fabs(limit_avg_value(m, r, solved.policy) -
                    solved.value[m.initial]) <= 1e-10);
  }
}

TEST_CASE("folding a finite-memory policy preserves step semantics") {
  Mdp m = fig3_mdp(0.5, 0.5);
  // Two memories: switch to memory 1 after visiting s1, acting differently.
  FiniteMemoryPolicy fmp;
  fmp.memory_count = 2;
  fmp.initial_memory = 0;
  fmp.update = {{0, 1, 0}, {1, 1, 1}};
  fmp.act.assign(2, std::vector<std::vector<double>>(3, {1.0, 0.0}));
  fmp.act[0][0] = {0.25, 0.75};
  auto fold = fold_policy(m, fmp);
  CHECK(fold.mdp.state_count == 6);
  CHECK(validate_mdp(fold.mdp).empty());
  CHECK(fold.mdp.initial == 0 * 2 + 0);
  // The folded policy at (s0, m0) matches act[0][s0].
  CHECK(fold.policy.probs[0][1] == doctest::Approx(0.75));
}
