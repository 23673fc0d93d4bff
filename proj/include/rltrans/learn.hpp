#pragma once

#include <cstdint>
#include <vector>

#include "rltrans/mdp.hpp"
#include "rltrans/specs.hpp"

namespace rltrans {

/// Shared learner knobs. The learning rate for a (s, a) pair is
/// lr_c / (lr_c + visits); exploration anneals linearly from eps_start to
/// eps_end over the first anneal_fraction of the budget.
struct LearnerConfig {
  std::uint64_t seed = 0;
  long step_budget = 100000;
  long eval_every = 1000;
  double eps_start = 1.0;
  double eps_end = 0.05;
  double anneal_fraction = 0.5;
  double lr_c = 10.0;

  void check() const;
};

struct PolicySnapshot {
  long iteration = 0;
  FiniteMemoryPolicy policy;
};

/// Sequence of output policies of a learner, one snapshot per recorded
/// iteration (iterations strictly increasing).
struct PolicyTrace {
  std::vector<PolicySnapshot> snapshots;
};

struct QLearningResult {
  PolicyTrace trace;
  std::vector<std::vector<double>> q;  // final Q table [s][a]
};

// Tabular Q-learning with epsilon-greedy exploration over a black-box
// simulator with known transition rewards. Episodes reset every H steps
// where gamma^H <= 1e-6. Deterministic given the seed.
QLearningResult q_learning(Simulator& sim, int state_count, int action_count,
                           const RewardTable& reward, double gamma,
                           const LearnerConfig& config);

// Certainty-equivalence learner: explores (s, a) pairs round-robin by
// reset-and-navigate (navigation plans on the current estimate), fits the
// maximum-likelihood model with self-loop defaults for unvisited rows, and
// snapshots the exact optimal witness on the estimate. Consumes exactly
// step_budget inner transitions.
PolicyTrace model_based_learner(Simulator& sim, const MdpShape& shape,
                                const Specification& spec,
                                const LearnerConfig& config);

// Number of snapshots that are not eps-optimal for (mdp, spec), by exact
// evaluation against the known model.
long pac_mistake_count(const PolicyTrace& trace, const Mdp& mdp,
                       const Specification& spec, double eps);

struct ConvergencePoint {
  long iteration = 0;
  double value = 0.0;
  double gap = 0.0;
};

// Exact J of every snapshot and its gap to the optimal value. Monotonicity
// is not asserted anywhere; the final gap is what experiments report.
std::vector<ConvergencePoint> convergence_trace(const PolicyTrace& trace,
                                                const Mdp& mdp,
                                                const Specification& spec);

// The maximum-likelihood model estimate used by model_based_learner,
// exposed for tests: counts become rows, unvisited (s, a) default to a
// self-loop.
Mdp model_from_counts(const MdpShape& shape,
                      const std::vector<std::vector<std::vector<long>>>& counts);

}  // namespace rltrans
