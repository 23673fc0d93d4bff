#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rltrans/learn.hpp"
#include "rltrans/refute.hpp"
#include "rltrans/solve.hpp"
#include "test_util.hpp"

using namespace rltrans;
using namespace testutil;

namespace {

class CountingSimulator final : public Simulator {
 public:
  CountingSimulator(const Mdp& mdp, std::uint64_t seed) : sim_(mdp, seed) {}
  int state() const override { return sim_.state(); }
  void reset() override { sim_.reset(); }
  int step(int a) override {
    ++steps;
    return sim_.step(a);
  }
  long steps = 0;

 private:
  MdpSimulator sim_;
};

}  // namespace

TEST_CASE("q-learning with gamma 0 estimates immediate rewards") {
  Rng rng(21);
  Mdp m = random_mdp(rng, 3, 2, 1);
  RewardTable r = random_reward(rng, 3, 2);
  MdpSimulator sim(m, 4);
  LearnerConfig cfg;
  cfg.seed = 4;
  cfg.step_budget = 100000;
  cfg.eval_every = 100000;
  cfg.eps_start = cfg.eps_end = 1.0;  // pure exploration keeps visits frequent
  auto result = q_learning(sim, 3, 2, r, 0.0, cfg);
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 2; ++a) {
      double expected = 0.0;
      for (const auto& t : m.rows[s][a]) expected += t.prob * r.at(s, a, t.to);
      CHECK(std::fabs(result.q[s][a] - expected) <= 0.02);
    }
}

TEST_CASE("q-learning reaches the optimum on a deterministic chain") {
  Mdp chain;
  chain.state_count = 3;
  chain.action_count = 2;
  chain.initial = 0;
  chain.propositions = {"b"};
  chain.labels = {0, 0, 1};
  chain.rows.assign(3, std::vector<std::vector<Transition>>(2));
  chain.rows[0][0] = {{1, 1.0}};
  chain.rows[0][1] = {{0, 1.0}};
  chain.rows[1][0] = {{2, 1.0}};
  chain.rows[1][1] = {{0, 1.0}};
  chain.rows[2][0] = {{2, 1.0}};
  chain.rows[2][1] = {{2, 1.0}};
  RewardTable r(3, 2);
  r.at(1, 0, 2) = 1.0;
  MdpSimulator sim(chain, 0);
  LearnerConfig cfg;
  cfg.seed = 0;
  cfg.step_budget = 200000;
  cfg.eval_every = 50000;
  auto result = q_learning(sim, 3, 2, r, 0.9, cfg);
  auto vi = value_iteration_discounted(chain, r, Discount(0.9), 1e-9);
  auto greedy = result.trace.snapshots.back().policy;
  double learned = discounted_value(
      chain, r, Discount(0.9),
      PositionalPolicy{greedy.act[0]})[chain.initial];
  CHECK(std::fabs(learned - vi.value[chain.initial]) <= 0.05);

  // Q values stay within the discounted reward bound.
  for (const auto& row : result.q)
    for (double q : row) CHECK(std::fabs(q) <= 1.0 / (1.0 - 0.9) + 1e-9);
}

TEST_CASE("q-learning is deterministic given the seed") {
  Rng rng(22);
  Mdp m = random_mdp(rng, 4, 2, 1);
  RewardTable r = random_reward(rng, 4, 2);
  LearnerConfig cfg;
  cfg.seed = 99;
  cfg.step_budget = 20000;
  cfg.eval_every = 5000;
  MdpSimulator sim_a(m, 99), sim_b(m, 99);
  auto a = q_learning(sim_a, 4, 2, r, 0.9, cfg);
  auto b = q_learning(sim_b, 4, 2, r, 0.9, cfg);
  CHECK(a.q == b.q);
  REQUIRE(a.trace.snapshots.size() == b.trace.snapshots.size());
  for (std::size_t i = 0; i < a.trace.snapshots.size(); ++i)
    CHECK(a.trace.snapshots[i].policy.act == b.trace.snapshots[i].policy.act);
}

TEST_CASE("model-based learner budget accounting and defaults") {
  Mdp m = fig4_mdp(1, 1);
  Specification spec = SafeSpec{{"b"}};

  // Zero budget: one snapshot from the all-self-loop default model.
  CountingSimulator sim0(m, 5);
  LearnerConfig cfg;
  cfg.seed = 5;
  cfg.step_budget = 0;
  cfg.eval_every = 1;
  auto trace0 = model_based_learner(sim0, shape_of(m), spec, cfg);
  CHECK(sim0.steps == 0);
  REQUIRE(trace0.snapshots.size() == 1);
  CHECK(trace0.snapshots[0].iteration == 0);

  // Exactly K transitions are consumed.
  for (long budget : {1L, 7L, 21L}) {
    CountingSimulator sim(m, 5);
    cfg.step_budget = budget;
    auto trace = model_based_learner(sim, shape_of(m), spec, cfg);
    CHECK(sim.steps == budget);
    CHECK(trace.snapshots.back().iteration == budget);
    for (std::size_t i = 1; i < trace.snapshots.size(); ++i)
      CHECK(trace.snapshots[i].iteration > trace.snapshots[i - 1].iteration);
  }
}

TEST_CASE("model estimates concentrate on the true probabilities") {
  Mdp coin;
  coin.state_count = 2;
  coin.action_count = 1;
  coin.initial = 0;
  coin.propositions = {"b"};
  coin.labels = {0, 1};
  coin.rows = {{{{0, 0.5}, {1, 0.5}}}, {{{0, 1.0}}}};
  int close = 0;
  for (int seed = 0; seed < 10; ++seed) {
    MdpSimulator sim(coin, mix_seed(1000, seed));
    std::vector<std::vector<std::vector<long>>> counts(
        2, std::vector<std::vector<long>>(1, std::vector<long>(2, 0)));
    int s = sim.state();
    for (int i = 0; i < 10000; ++i) {
      int t = sim.step(0);
      ++counts[s][0][t];
      s = t;
    }
    Mdp model = model_from_counts(shape_of(coin), counts);
    close += std::fabs(model.prob(0, 0, 1) - 0.5) <= 0.02;
  }
  CHECK(close >= 8);

  // Unvisited rows default to self-loops.
  std::vector<std::vector<std::vector<long>>> empty(
      2, std::vector<std::vector<long>>(1, std::vector<long>(2, 0)));
  Mdp defaults = model_from_counts(shape_of(coin), empty);
  CHECK(defaults.prob(0, 0, 0) == 1.0);
  CHECK(defaults.prob(1, 0, 1) == 1.0);
}

TEST_CASE("model-based learner closes the gap once rows are visited") {
  Mdp m = fig3_mdp(1, 1);
  Specification spec = SafeSpec{{"b"}};
  MdpSimulator sim(m, 8);
  LearnerConfig cfg;
  cfg.seed = 8;
  cfg.step_budget = 60;
  cfg.eval_every = 10;
  auto trace = model_based_learner(sim, shape_of(m), spec, cfg);
  auto points = convergence_trace(trace, m, spec);
  CHECK(points.back().gap <= 1e-9);
}

TEST_CASE("mistake counting") {
  Mdp m = fig3_mdp(0.9, 0.9);
  Specification spec = SafeSpec{{"b"}};
  auto opt = optimal_value(m, spec);
  auto bad = FiniteMemoryPolicy::from_positional(PositionalPolicy::always(0, 3, 2), 3);

  PolicyTrace all_good;
  for (int i = 0; i < 10; ++i) all_good.snapshots.push_back({i + 1, opt.witness});
  CHECK(pac_mistake_count(all_good, m, spec, 0.1) == 0);

  PolicyTrace alternating;
  for (int i = 0; i < 20; ++i)
    alternating.snapshots.push_back({i + 1, i % 2 == 0 ? opt.witness : bad});
  CHECK(pac_mistake_count(alternating, m, spec, 0.05) == 10);

  // Counting over a suffix can only shrink the count.
  PolicyTrace suffix;
  for (int i = 10; i < 20; ++i) suffix.snapshots.push_back(alternating.snapshots[i]);
  CHECK(pac_mistake_count(suffix, m, spec, 0.05) <=
        pac_mistake_count(alternating, m, spec, 0.05));
}

TEST_CASE("q-learning trace has a finite mistake count and eps-optimal tail") {
  Rng rng(23);
  Mdp m = random_mdp(rng, 4, 2, 1);
  RewardTable r = random_reward(rng, 4, 2);
  Specification spec = DiscountedRmSpec{[&] {
                                          RewardMachine flat;
                                          flat.rm_state_count = 1;
                                          flat.initial = 0;
                                          flat.update.assign(1, std::vector<int>(4, 0));
                                          flat.rewards = {r};
                                          return flat;
                                        }(),
                                        Discount(0.9)};
  MdpSimulator sim(m, 3);
  LearnerConfig cfg;
  cfg.seed = 3;
  cfg.step_budget = 400000;
  cfg.eval_every = 20000;
  auto result = q_learning(sim, 4, 2, r, 0.9, cfg);
  auto points = convergence_trace(result.trace, m, spec);
  CHECK(points.back().gap <= 0.1);
  long mistakes = pac_mistake_count(result.trace, m, spec, 0.1);
  CHECK(mistakes < static_cast<long>(result.trace.snapshots.size()));
  // The tail of the trace stays eps-optimal.
  int tail = static_cast<int>(points.size()) / 2;
  for (std::size_t i = tail; i < points.size(); ++i) CHECK(points[i].gap <= 0.1);
}

TEST_CASE("convergence trace on a constant-optimal sequence") {
  Mdp m = fig3_mdp(1, 1);
  Specification spec = SafeSpec{{"b"}};
  auto opt = optimal_value(m, spec);
  PolicyTrace trace;
  for (int i = 0; i < 5; ++i) trace.snapshots.push_back({i + 1, opt.witness});
  for (const auto& point : convergence_trace(trace, m, spec)) {
    CHECK(point.gap == 0.0);
    CHECK(point.value == 1.0);
  }
}
