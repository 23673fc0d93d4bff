#pragma once

#include <stdexcept>
#include <vector>

#include "rltrans/mdp.hpp"

namespace rltrans {

/// Raised when a linear system that should be regular by construction
/// fails to solve to the promised residual.
struct NumericsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValuePolicy {
  std::vector<double> value;
  PositionalPolicy policy;
};

struct BuchiResult {
  std::vector<double> value;
  FiniteMemoryPolicy policy;
};

/// Markov chain induced by fixing a positional policy.
struct MarkovChain {
  int state_count = 0;
  int initial = 0;
  std::vector<std::vector<std::pair<int, double>>> rows;  // sparse successor lists
};

MarkovChain induced_chain(const Mdp& mdp, const PositionalPolicy& policy);

// Expected one-step reward per state under a positional policy.
std::vector<double> expected_reward(const Mdp& mdp, const RewardTable& reward,
                                    const PositionalPolicy& policy);

// Probability of ever visiting `target` from each state of a chain.
// States that cannot reach the target get exactly 0 and states that cannot
// avoid it get exactly 1; the remainder is a direct linear solve.
std::vector<double> chain_reach_prob(const MarkovChain& chain,
                                     const std::vector<char>& target);

// Probability, from the chain's initial state, that the run is absorbed
// into a recurrent class intersecting `accepting`.
double chain_buchi_prob(const MarkovChain& chain, const std::vector<char>& accepting);

// Exact policy-evaluation solve on a chain: v = r + diag(gamma) P v.
std::vector<double> chain_discounted_value(const MarkovChain& chain,
                                           const std::vector<double>& reward,
                                           const std::vector<double>& gamma);

// Limit-average value per state of a chain with per-state expected rewards:
// recurrent-class gains weighted by absorption probabilities.
std::vector<double> chain_gains(const MarkovChain& chain,
                                const std::vector<double>& reward);

/// Recurrent-class structure of a finite chain.
struct ChainDecomposition {
  std::vector<std::vector<int>> recurrent_classes;
  std::vector<int> class_of;  // -1 for transient states
};

ChainDecomposition decompose_chain(const MarkovChain& chain);

// Stationary distribution of one recurrent class (indexed like `cls`).
std::vector<double> stationary_distribution(const MarkovChain& chain,
                                            const std::vector<int>& cls);

// Probability, per start state, of being absorbed into each recurrent class.
// Result is indexed [state][class].
std::vector<std::vector<double>> absorption_probs(const MarkovChain& chain,
                                                  const ChainDecomposition& dec);

// Exact policy evaluation for (possibly state-dependent) discounted rewards:
// solves v = r_pi + Gamma P_pi v by elimination.
std::vector<double> discounted_value(const Mdp& mdp, const RewardTable& reward,
                                     const Discount& gamma,
                                     const PositionalPolicy& policy);

// Optimal discounted value and a greedy deterministic policy, ties broken by
// lowest action index. The returned value is the exact evaluation of the
// greedy policy after value iteration has converged to the tol-dependent
// Bellman residual.
ValuePolicy value_iteration_discounted(const Mdp& mdp, const RewardTable& reward,
                                       const Discount& gamma, double tol);

// Maximum probability of ever visiting `target`, with a deterministic
// positional witness that actually makes progress toward the target.
ValuePolicy max_reach_prob(const Mdp& mdp, const std::vector<char>& target);

// Maximum probability of staying inside `safe` forever.
ValuePolicy max_safe_prob(const Mdp& mdp, const std::vector<char>& safe);

// Limit-average (gain) value of a positional policy at the initial state,
// via recurrent-class decomposition of the induced chain. For positional
// policies the Cesaro limit exists, so liminf coincides with the limit.
double limit_avg_value(const Mdp& mdp, const RewardTable& reward,
                       const PositionalPolicy& policy);

// Gain per state (same analysis as limit_avg_value).
std::vector<double> limit_avg_values(const Mdp& mdp, const RewardTable& reward,
                                     const PositionalPolicy& policy);

/// Maximal end component: a closed, strongly connected sub-MDP.
struct Mec {
  std::vector<int> states;
  std::vector<std::vector<int>> allowed;  // allowed[i] = actions usable at states[i]
};

std::vector<Mec> mec_decomposition(const Mdp& mdp);

// Maximum limit-average (gain) value per state for plain transition
// rewards: per-MEC optimal gains by relative value iteration on the
// aperiodicity-transformed sub-MDP, combined by an optimal-commitment
// reachability pass. The returned policy commits inside a gain-optimal
// MEC and heads toward it elsewhere; the value vector is the exact
// evaluation of that policy.
ValuePolicy max_gain(const Mdp& mdp, const RewardTable& reward);

// Maximum probability of visiting `accepting` infinitely often: reach the
// union of accepting MECs, then cycle inside one forever.
BuchiResult max_buchi_prob(const Mdp& mdp, const std::vector<char>& accepting);

}  // namespace rltrans
