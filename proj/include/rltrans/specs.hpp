#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "rltrans/ltl.hpp"
#include "rltrans/mdp.hpp"
#include "rltrans/solve.hpp"

namespace rltrans {

struct UnsupportedSpecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Finite-state reward transducer keyed by MDP states: the machine state is
/// updated on every newly entered MDP state and the reward of a transition
/// (s, a, s') is read in the machine state that was current at s.
struct RewardMachine {
  int rm_state_count = 1;
  int initial = 0;
  std::vector<std::vector<int>> update;  // [u][s] -> u'
  std::vector<RewardTable> rewards;      // [u] -> R(s, a, s')
  bool normalized = false;

  int next(int u, int entered_state) const { return update[u][entered_state]; }
  double reward(int u, int s, int a, int to) const { return rewards[u].at(s, a, to); }
  void check(int states, int actions) const;
};

/// Reward machine variant keyed by label bitmasks instead of states, so it
/// is independent of any particular MDP. Tables are dense over all
/// 2^prop_count masks (prop_count is capped accordingly).
struct AbstractRewardMachine {
  int rm_state_count = 1;
  int initial = 0;
  int prop_count = 0;
  std::vector<std::vector<int>> update;      // [u][mask] -> u'
  std::vector<std::vector<double>> rewards;  // [u][mask] -> r
  bool normalized = false;

  int mask_count() const { return 1 << prop_count; }
  int next(int u, std::uint64_t mask) const { return update[u][mask]; }
  double reward(int u, std::uint64_t mask) const { return rewards[u][mask]; }
  void check() const;
};

constexpr int kMaxMaterializedProps = 20;

// Instantiates an ARM over a concrete state space: updates and rewards are
// read through the labeling function (the reward of (s, a, s') is the ARM
// reward on the label of s').
RewardMachine to_reward_machine(const AbstractRewardMachine& arm, const MdpShape& shape);

using RewardMachineLike = std::variant<RewardMachine, AbstractRewardMachine>;

/// Buchi automaton over label bitmasks. Nondeterministic successor sets are
/// representable; the built-in automata are deterministic.
struct BuchiAutomaton {
  int state_count = 0;
  int initial = 0;
  int prop_count = 0;
  std::vector<std::vector<std::vector<int>>> next;  // [q][mask] -> successors
  std::vector<char> accepting;

  int mask_count() const { return 1 << prop_count; }
  bool is_deterministic() const;
  void check() const;
};

// Deterministic built-in automata; `pred` classes are evaluated per mask.
BuchiAutomaton dba_eventually(int prop_count, const LtlFormula& pred);
BuchiAutomaton dba_always(int prop_count, const LtlFormula& pred);
BuchiAutomaton dba_infinitely_often(int prop_count, const LtlFormula& pred);

// Recognizes the built-in shapes F p, G p, GF p (p propositional, possibly
// a Boolean combination) in desugared form and returns the matching
// deterministic automaton.
std::optional<BuchiAutomaton> builtin_automaton(const LtlFormula& formula,
                                                int prop_count);

struct DiscountedRmSpec {
  RewardMachineLike machine;
  Discount gamma;
};

struct LimitAvgRmSpec {
  RewardMachineLike machine;
};

struct ReachSpec {
  std::vector<std::string> props;  // accepting set X
};

struct SafeSpec {
  std::vector<std::string> props;  // safe set X
};

struct LtlSpec {
  LtlFormula formula;
  std::optional<BuchiAutomaton> automaton;
  // Atom names in index order; evaluation requires the target MDP to declare
  // the same propositions in the same order.
  std::vector<std::string> propositions;
};

/// A specification assigns a value J to every policy of a labeled MDP.
using Specification =
    std::variant<DiscountedRmSpec, LimitAvgRmSpec, ReachSpec, SafeSpec, LtlSpec>;

// The ARM of Fig.-style reach encoding: one trigger step worth reward 1,
// absorbing reward-1 state afterwards; its limit average equals the
// probability of ever seeing a label intersecting X.
AbstractRewardMachine build_reach_arm(const std::vector<std::string>& propositions,
                                      const std::vector<std::string>& X);
AbstractRewardMachine build_reach_arm_mask(int prop_count, std::uint64_t x_mask);

// Complemented-reward counterpart: limit average equals the probability of
// every label staying inside X.
AbstractRewardMachine build_safe_arm(const std::vector<std::string>& propositions,
                                     const std::vector<std::string>& X);
AbstractRewardMachine build_safe_arm_mask(int prop_count, std::uint64_t x_mask);

// Discounted return of a finite run, with per-state discounting: reward i
// is scaled by the product of gamma over the first i states.
double rm_return_discounted(const RewardMachine& rm, const Run& run,
                            const Discount& gamma);

// Discounted return of an ultimately periodic run in closed form: the tail
// is summed exactly once the (cycle position, machine state) pair repeats.
double rm_return_discounted(const RewardMachine& rm, const LassoRun& lasso,
                            const Discount& gamma);

// t-step average reward; the run must have at least t steps.
double rm_return_average(const RewardMachine& rm, const Run& run, int t);

/// Product of an MDP with a reward machine; states are (s, u) flattened as
/// s * U + u.
struct RmProduct {
  Mdp mdp;
  RewardTable reward;
  Discount gamma;  // lifted per-state discount (meaningful for discounted specs)
  int rm_state_count = 1;
  std::vector<int> base_state;
  std::vector<int> rm_state;
};

RmProduct build_rm_product(const Mdp& mdp, const RewardMachineLike& machine,
                           const Discount* gamma);

/// Product of an MDP with a deterministic Buchi automaton; the automaton
/// component tracks the state reached after reading every label up to and
/// including the current MDP state.
struct DbaProduct {
  Mdp mdp;
  std::vector<char> accepting;
  int aut_state_count = 1;
  std::vector<int> base_state;
  std::vector<int> aut_state;
};

DbaProduct build_dba_product(const Mdp& mdp, const BuchiAutomaton& dba);

// Lifts a policy on base states to a product whose states map to base
// states through `base_state`.
PositionalPolicy lift_policy(const PositionalPolicy& policy,
                             const std::vector<int>& base_state);

// States whose label intersects / is contained in the given mask.
std::vector<char> label_intersects(const Mdp& mdp, std::uint64_t mask);
std::vector<char> label_subset_of(const Mdp& mdp, std::uint64_t mask);
std::uint64_t resolve_props(const Mdp& mdp, const std::vector<std::string>& props);

// J^M_phi(policy), computed exactly by product constructions and the
// core oracles. Finite-memory policies are folded into the state space.
double spec_value(const Mdp& mdp, const Specification& spec,
                  const FiniteMemoryPolicy& policy);
double spec_value(const Mdp& mdp, const Specification& spec,
                  const PositionalPolicy& policy);

struct OptimalResult {
  double value = 0.0;
  FiniteMemoryPolicy witness;
};

// Optimal value sup_pi J and a deterministic finite-memory witness (memory
// bounded by the reward machine or automaton size). Throws
// UnsupportedSpecError for specification classes without an exact oracle;
// in particular, limit-average machines are only dispatched through the
// reachability/safety-shaped fast path here.
OptimalResult optimal_value(const Mdp& mdp, const Specification& spec);

// General limit-average machine optimum through the product construction
// and the multichain gain solver. Kept separate from optimal_value: the
// optimality-preservation checker needs the threshold for arbitrary
// machines, while the public oracle surface stays restricted.
OptimalResult limit_avg_optimal_by_gain(const Mdp& mdp, const RewardMachineLike& machine);

bool is_eps_optimal(const Mdp& mdp, const Specification& spec,
                    const FiniteMemoryPolicy& policy, double eps);
bool is_eps_optimal(const Mdp& mdp, const Specification& spec,
                    const PositionalPolicy& policy, double eps);

}  // namespace rltrans
