#pragma once

// Shared generators and independent oracles for the test suites. The
// oracles deliberately use different algorithms from the library (plain
// fixpoint iteration, mutual-reachability recurrence detection, Monte
// Carlo) so they can serve as cross-checks.

#include <algorithm>
#include <cmath>
#include <vector>

#include "rltrans/learn.hpp"
#include "rltrans/mdp.hpp"
#include "rltrans/reduce.hpp"
#include "rltrans/solve.hpp"
#include "rltrans/specs.hpp"

namespace testutil {

using namespace rltrans;

inline Mdp random_mdp(Rng& rng, int states, int actions, int props) {
  Mdp m;
  m.state_count = states;
  m.action_count = actions;
  m.initial = 0;
  for (int p = 0; p < props; ++p) m.propositions.push_back(std::string(1, 'a' + p));
  for (int a = 0; a < actions; ++a) m.action_names.push_back("a" + std::to_string(a));
  m.labels.resize(states);
  const std::uint64_t mask_limit = std::uint64_t{1} << props;
  for (int s = 0; s < states; ++s)
    m.labels[s] = static_cast<std::uint64_t>(rng.uniform() * mask_limit);
  m.rows.assign(states, std::vector<std::vector<Transition>>(actions));
  for (int s = 0; s < states; ++s)
    for (int a = 0; a < actions; ++a) {
      int fan = 1 + static_cast<int>(rng.uniform() * std::min(3, states));
      std::vector<double> w(states, 0.0);
      double total = 0.0;
      for (int i = 0; i < fan; ++i) {
        int t = static_cast<int>(rng.uniform() * states);
        double x = 0.05 + rng.uniform();
        w[t] += x;
        total += x;
      }
      for (int t = 0; t < states; ++t)
        if (w[t] > 0.0) m.rows[s][a].push_back({t, w[t] / total});
    }
  return m;
}

inline RewardTable random_reward(Rng& rng, int states, int actions) {
  RewardTable r(states, actions);
  for (int s = 0; s < states; ++s)
    for (int a = 0; a < actions; ++a)
      for (int t = 0; t < states; ++t) r.at(s, a, t) = rng.uniform();
  return r;
}

inline RewardMachine random_rm(Rng& rng, int machine_states, int states, int actions) {
  RewardMachine rm;
  rm.rm_state_count = machine_states;
  rm.initial = 0;
  rm.normalized = true;
  rm.update.assign(machine_states, std::vector<int>(states, 0));
  rm.rewards.assign(machine_states, RewardTable(states, actions));
  for (int u = 0; u < machine_states; ++u)
    for (int s = 0; s < states; ++s)
      rm.update[u][s] = static_cast<int>(rng.uniform() * machine_states);
  for (int u = 0; u < machine_states; ++u)
    for (int s = 0; s < states; ++s)
      for (int a = 0; a < actions; ++a)
        for (int t = 0; t < states; ++t) rm.rewards[u].at(s, a, t) = rng.uniform();
  return rm;
}

inline AbstractRewardMachine random_arm(Rng& rng, int machine_states, int props) {
  AbstractRewardMachine arm;
  arm.rm_state_count = machine_states;
  arm.initial = 0;
  arm.prop_count = props;
  arm.normalized = true;
  const int masks = 1 << props;
  arm.update.assign(machine_states, std::vector<int>(masks, 0));
  arm.rewards.assign(machine_states, std::vector<double>(masks, 0.0));
  for (int u = 0; u < machine_states; ++u)
    for (int m = 0; m < masks; ++m) {
      arm.update[u][m] = static_cast<int>(rng.uniform() * machine_states);
      arm.rewards[u][m] = rng.uniform();
    }
  return arm;
}

inline PositionalPolicy random_det_policy(Rng& rng, int states, int actions) {
  std::vector<int> choice(states);
  for (int s = 0; s < states; ++s)
    choice[s] = static_cast<int>(rng.uniform() * actions);
  return PositionalPolicy::deterministic(choice, actions);
}

inline PositionalPolicy random_stochastic_policy(Rng& rng, int states, int actions) {
  PositionalPolicy p;
  p.probs.assign(states, std::vector<double>(actions, 0.0));
  for (int s = 0; s < states; ++s) {
    double total = 0.0;
    for (int a = 0; a < actions; ++a) {
      p.probs[s][a] = 0.05 + rng.uniform();
      total += p.probs[s][a];
    }
    for (int a = 0; a < actions; ++a) p.probs[s][a] /= total;
  }
  return p;
}

// Valid-by-construction random descriptor over `shape` with a surjective
// beta (identity on the first `states` bar states).
inline ReductionDescriptor random_descriptor(Rng& rng, const MdpShape& shape,
                                             int extra_bar_states, int bar_actions) {
  const int n = shape.state_count;
  const int bar = n + extra_bar_states;
  ReductionDescriptor rd;
  rd.bar_state_count = bar;
  rd.bar_action_count = bar_actions;
  rd.bar_initial = shape.initial;
  rd.inner_state_count = n;
  rd.inner_action_count = shape.action_count;
  rd.inner_initial = shape.initial;
  rd.bar_propositions = shape.propositions.empty()
                            ? std::vector<std::string>{"b"}
                            : shape.propositions;
  rd.beta.resize(bar);
  rd.bar_labels.assign(bar, 0);
  for (int bs = 0; bs < bar; ++bs)
    rd.beta[bs] = bs < n ? bs : static_cast<int>(rng.uniform() * n);
  std::vector<std::vector<int>> preimage(n);
  for (int bs = 0; bs < bar; ++bs) preimage[rd.beta[bs]].push_back(bs);

  rd.alpha.assign(bar, std::vector<std::vector<double>>(
                           bar_actions, std::vector<double>(shape.action_count, 0.0)));
  rd.q1.assign(bar, std::vector<std::vector<double>>(
                        bar_actions, std::vector<double>(bar, 0.0)));
  rd.q2.assign(bar, std::vector<std::vector<std::vector<double>>>(
                        bar_actions,
                        std::vector<std::vector<double>>(
                            shape.action_count, std::vector<double>(bar, 0.0))));
  for (int bs = 0; bs < bar; ++bs)
    for (int ba = 0; ba < bar_actions; ++ba) {
      double total = 0.0;
      for (int a = 0; a < shape.action_count; ++a) {
        rd.alpha[bs][ba][a] = 0.05 + rng.uniform();
        total += rd.alpha[bs][ba][a];
      }
      for (int a = 0; a < shape.action_count; ++a) rd.alpha[bs][ba][a] /= total;

      double roll = rng.uniform();
      double p = roll < 0.3 ? 0.0 : (roll > 0.9 ? 1.0 : rng.uniform());
      if (p > 0.0) {
        const auto& cls = preimage[rd.beta[bs]];
        std::vector<double> w(cls.size());
        double wt = 0.0;
        for (std::size_t i = 0; i < cls.size(); ++i) {
          w[i] = 0.05 + rng.uniform();
          wt += w[i];
        }
        for (std::size_t i = 0; i < cls.size(); ++i)
          rd.q1[bs][ba][cls[i]] = p * w[i] / wt;
      }
      for (int a = 0; a < shape.action_count; ++a)
        for (int t = 0; t < n; ++t) {
          const auto& cls = preimage[t];
          std::vector<double> w(cls.size());
          double wt = 0.0;
          for (std::size_t i = 0; i < cls.size(); ++i) {
            w[i] = 0.05 + rng.uniform();
            wt += w[i];
          }
          for (std::size_t i = 0; i < cls.size(); ++i)
            rd.q2[bs][ba][a][cls[i]] = (1.0 - p) * w[i] / wt;
        }
    }
  rd.spec_out = ReachSpec{{rd.bar_propositions.front()}};
  return rd;
}

// --- independent oracles ---

// Policy evaluation by plain fixpoint iteration.
inline std::vector<double> vi_policy_eval(const Mdp& m, const RewardTable& reward,
                                          double gamma, const PositionalPolicy& pol,
                                          double tol) {
  std::vector<double> v(m.state_count, 0.0), next(m.state_count, 0.0);
  double delta = 1.0;
  while (delta > tol) {
    delta = 0.0;
    for (int s = 0; s < m.state_count; ++s) {
      double x = 0.0;
      for (int a = 0; a < m.action_count; ++a) {
        double pa = pol.probs[s][a];
        if (pa == 0.0) continue;
        for (const auto& t : m.rows[s][a])
          x += pa * t.prob * (reward.at(s, a, t.to) + gamma * v[t.to]);
      }
      next[s] = x;
      delta = std::max(delta, std::fabs(x - v[s]));
    }
    std::swap(v, next);
  }
  return v;
}

// Minimal reachability probability via least-fixpoint iteration.
inline std::vector<double> vi_min_reach(const Mdp& m, const std::vector<char>& target) {
  std::vector<double> v(m.state_count, 0.0);
  for (int s = 0; s < m.state_count; ++s)
    if (target[s]) v[s] = 1.0;
  for (int iter = 0; iter < 200000; ++iter) {
    double delta = 0.0;
    for (int s = 0; s < m.state_count; ++s) {
      if (target[s]) continue;
      double best = 2.0;
      for (int a = 0; a < m.action_count; ++a) {
        double q = 0.0;
        for (const auto& t : m.rows[s][a]) q += t.prob * v[t.to];
        best = std::min(best, q);
      }
      delta = std::max(delta, std::fabs(best - v[s]));
      v[s] = best;
    }
    if (delta <= 1e-13) break;
  }
  return v;
}

// Reach probability of a fixed target set in the chain induced by a
// deterministic positional policy, by fixpoint iteration.
inline double chain_reach_iterate(const Mdp& m, const PositionalPolicy& pol,
                                  const std::vector<char>& target, int start) {
  std::vector<double> v(m.state_count, 0.0);
  for (int s = 0; s < m.state_count; ++s)
    if (target[s]) v[s] = 1.0;
  for (int iter = 0; iter < 200000; ++iter) {
    double delta = 0.0;
    for (int s = 0; s < m.state_count; ++s) {
      if (target[s]) continue;
      double x = 0.0;
      int a = pol.action_at(s);
      for (const auto& t : m.rows[s][a]) x += t.prob * v[t.to];
      delta = std::max(delta, std::fabs(x - v[s]));
      v[s] = x;
    }
    if (delta <= 1e-13) break;
  }
  return v[start];
}

// Buchi value of one deterministic positional policy: recurrence detection
// by mutual reachability, then reach-by-iteration to the accepting
// recurrent states.
inline double buchi_value_of_policy(const Mdp& m, const PositionalPolicy& pol,
                                    const std::vector<char>& accepting) {
  const int n = m.state_count;
  std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
  for (int s = 0; s < n; ++s) {
    std::vector<int> stack{s};
    reach[s][s] = 1;
    while (!stack.empty()) {
      int x = stack.back();
      stack.pop_back();
      int a = pol.action_at(x);
      for (const auto& t : m.rows[x][a])
        if (t.prob > 0.0 && !reach[s][t.to]) {
          reach[s][t.to] = 1;
          stack.push_back(t.to);
        }
    }
  }
  std::vector<char> target(n, 0);
  for (int s = 0; s < n; ++s) {
    if (!accepting[s]) continue;
    bool recurrent = true;
    for (int t = 0; t < n; ++t)
      if (reach[s][t] && !reach[t][s]) recurrent = false;
    if (recurrent) target[s] = 1;
  }
  return chain_reach_iterate(m, pol, target, m.initial);
}

// Exhaustive maximum over deterministic positional policies.
inline double buchi_enumeration_best(const Mdp& m, const std::vector<char>& accepting) {
  long total = 1;
  for (int s = 0; s < m.state_count; ++s) total *= m.action_count;
  double best = 0.0;
  for (long index = 0; index < total; ++index) {
    long rest = index;
    std::vector<int> choice(m.state_count);
    for (int s = 0; s < m.state_count; ++s) {
      choice[s] = static_cast<int>(rest % m.action_count);
      rest /= m.action_count;
    }
    auto pol = PositionalPolicy::deterministic(choice, m.action_count);
    best = std::max(best, buchi_value_of_policy(m, pol, accepting));
  }
  return best;
}

inline std::vector<PositionalPolicy> all_det_policies(int states, int actions) {
  long total = 1;
  for (int s = 0; s < states; ++s) total *= actions;
  std::vector<PositionalPolicy> out;
  out.reserve(total);
  for (long index = 0; index < total; ++index) {
    long rest = index;
    std::vector<int> choice(states);
    for (int s = 0; s < states; ++s) {
      choice[s] = static_cast<int>(rest % actions);
      rest /= actions;
    }
    out.push_back(PositionalPolicy::deterministic(choice, actions));
  }
  return out;
}

}  // namespace testutil
