#include "rltrans/learn.hpp"

#include <algorithm>
#include <cmath>

#include "rltrans/solve.hpp"

namespace rltrans {

void LearnerConfig::check() const {
  if (step_budget < 0) throw std::invalid_argument("step budget must be nonnegative");
  if (eval_every <= 0) throw std::invalid_argument("eval_every must be positive");
  if (!(lr_c > 0.0)) throw std::invalid_argument("learning-rate constant must be positive");
  if (!(eps_start >= 0.0 && eps_start <= 1.0 && eps_end >= 0.0 && eps_end <= 1.0))
    throw std::invalid_argument("exploration rates must lie in [0,1]");
  if (!(anneal_fraction > 0.0 && anneal_fraction <= 1.0))
    throw std::invalid_argument("anneal fraction must lie in (0,1]");
}

namespace {

int greedy_action(const std::vector<double>& row) {
  int best = 0;
  for (int a = 1; a < static_cast<int>(row.size()); ++a)
    if (row[a] > row[best]) best = a;
  return best;
}

FiniteMemoryPolicy greedy_policy(const std::vector<std::vector<double>>& q,
                                 int action_count) {
  std::vector<int> choice(q.size());
  for (std::size_t s = 0; s < q.size(); ++s) choice[s] = greedy_action(q[s]);
  return FiniteMemoryPolicy::from_positional(
      PositionalPolicy::deterministic(choice, action_count),
      static_cast<int>(q.size()));
}

}  // namespace

QLearningResult q_learning(Simulator& sim, int state_count, int action_count,
                           const RewardTable& reward, double gamma,
                           const LearnerConfig& config) {
  config.check();
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("q_learning needs a constant discount in [0,1)");
  if (reward.states() != state_count || reward.actions() != action_count)
    throw std::invalid_argument("reward table shape mismatch");

  // Episode horizon: discounted mass beyond H is below 1e-6. At gamma = 0
  // any horizon qualifies; use one long enough to visit the state space.
  long horizon = 4L * state_count;
  if (gamma > 0.0)
    horizon = std::max<long>(1, static_cast<long>(
                                    std::ceil(std::log(1e-6) / std::log(gamma))));

  Rng rng(config.seed);
  QLearningResult out;
  out.q.assign(state_count, std::vector<double>(action_count, 0.0));
  std::vector<std::vector<long>> visits(state_count,
                                        std::vector<long>(action_count, 0));

  const long anneal_steps =
      std::max<long>(1, static_cast<long>(config.anneal_fraction *
                                          static_cast<double>(config.step_budget)));
  sim.reset();
  long in_episode = 0;
  for (long t = 0; t < config.step_budget; ++t) {
    if (in_episode >= horizon) {
      sim.reset();
      in_episode = 0;
    }
    int s = sim.state();
    double frac = std::min(1.0, static_cast<double>(t) / anneal_steps);
    double eps = config.eps_start + (config.eps_end - config.eps_start) * frac;
    int a;
    if (rng.uniform() < eps) {
      std::vector<double> uniform(action_count, 1.0);
      a = rng.sample(uniform);
    } else {
      a = greedy_action(out.q[s]);
    }
    int s2 = sim.step(a);
    ++in_episode;
    double lr = config.lr_c / (config.lr_c + static_cast<double>(visits[s][a]));
    ++visits[s][a];
    double target = reward.at(s, a, s2) +
                    gamma * out.q[s2][greedy_action(out.q[s2])];
    out.q[s][a] += lr * (target - out.q[s][a]);

    if ((t + 1) % config.eval_every == 0)
      out.trace.snapshots.push_back({t + 1, greedy_policy(out.q, action_count)});
  }
  if (out.trace.snapshots.empty() ||
      out.trace.snapshots.back().iteration != config.step_budget)
    out.trace.snapshots.push_back(
        {config.step_budget, greedy_policy(out.q, action_count)});
  return out;
}

Mdp model_from_counts(const MdpShape& shape,
                      const std::vector<std::vector<std::vector<long>>>& counts) {
  Mdp model;
  model.state_count = shape.state_count;
  model.action_count = shape.action_count;
  model.initial = shape.initial;
  model.propositions = shape.propositions;
  model.action_names = shape.action_names;
  model.labels = shape.labels;
  model.rows.assign(shape.state_count,
                    std::vector<std::vector<Transition>>(shape.action_count));
  for (int s = 0; s < shape.state_count; ++s)
    for (int a = 0; a < shape.action_count; ++a) {
      long total = 0;
      for (long c : counts[s][a]) total += c;
      if (total == 0) {
        model.rows[s][a] = {{s, 1.0}};  // unvisited rows default to a self-loop
        continue;
      }
      for (int t = 0; t < shape.state_count; ++t)
        if (counts[s][a][t] > 0)
          model.rows[s][a].push_back(
              {t, static_cast<double>(counts[s][a][t]) / static_cast<double>(total)});
    }
  return model;
}

PolicyTrace model_based_learner(Simulator& sim, const MdpShape& shape,
                                const Specification& spec,
                                const LearnerConfig& config) {
  config.check();
  const int n = shape.state_count;
  const int A = shape.action_count;
  std::vector<std::vector<std::vector<long>>> counts(
      n, std::vector<std::vector<long>>(A, std::vector<long>(n, 0)));

  PolicyTrace trace;
  auto snapshot = [&](long iteration) {
    if (!trace.snapshots.empty() && trace.snapshots.back().iteration == iteration)
      return;
    Mdp model = model_from_counts(shape, counts);
    trace.snapshots.push_back({iteration, optimal_value(model, spec).witness});
  };
  snapshot(0);

  sim.reset();
  long used = 0;
  int probe = 0;                       // round-robin index over (s, a) pairs
  long nav_steps_for_probe = 0;
  const long nav_cap = 8L * std::max(1, n);

  while (used < config.step_budget) {
    int target_s = probe / A;
    int target_a = probe % A;
    int s = sim.state();
    int taken;
    if (s == target_s) {
      taken = target_a;
    } else if (nav_steps_for_probe >= nav_cap) {
      // Give up navigating to this pair for now; move on.
      probe = (probe + 1) % (n * A);
      nav_steps_for_probe = 0;
      continue;
    } else {
      // Head for the probed state under the current model estimate.
      Mdp model = model_from_counts(shape, counts);
      std::vector<char> goal(n, 0);
      goal[target_s] = 1;
      auto plan = max_reach_prob(model, goal);
      taken = plan.policy.action_at(s);
      ++nav_steps_for_probe;
    }
    int s2 = sim.step(taken);
    ++counts[s][taken][s2];
    ++used;
    if (s == target_s && taken == target_a) {
      probe = (probe + 1) % (n * A);
      nav_steps_for_probe = 0;
      sim.reset();
    }
    if (used % config.eval_every == 0) snapshot(used);
  }
  snapshot(used);
  return trace;
}

long pac_mistake_count(const PolicyTrace& trace, const Mdp& mdp,
                       const Specification& spec, double eps) {
  double star = optimal_value(mdp, spec).value;
  long count = 0;
  for (const auto& snap : trace.snapshots)
    if (spec_value(mdp, spec, snap.policy) < star - eps - 1e-9) ++count;
  return count;
}

std::vector<ConvergencePoint> convergence_trace(const PolicyTrace& trace,
                                                const Mdp& mdp,
                                                const Specification& spec) {
  double star = optimal_value(mdp, spec).value;
  std::vector<ConvergencePoint> out;
  out.reserve(trace.snapshots.size());
  for (const auto& snap : trace.snapshots) {
    double j = spec_value(mdp, spec, snap.policy);
    out.push_back({snap.iteration, j, star - j});
  }
  return out;
}

}  // namespace rltrans
