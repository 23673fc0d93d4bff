#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rltrans/rng.hpp"

namespace rltrans {

constexpr double kProbTol = 1e-9;

/// One sparse transition entry: successor state and its probability.
struct Transition {
  int to = 0;
  double prob = 0.0;
};

/// Finite labeled MDP. States and actions are dense indices; labels are
/// bitmasks over at most 64 named propositions. Immutable by convention
/// after construction; safe to share across threads.
struct Mdp {
  int state_count = 0;
  int action_count = 0;
  int initial = 0;
  std::vector<std::string> propositions;        // at most 64
  std::vector<std::string> action_names;        // optional, size action_count
  std::vector<std::uint64_t> labels;            // per state, bitmask
  // rows[s][a] -> sparse successor list.
  std::vector<std::vector<std::vector<Transition>>> rows;

  const std::vector<Transition>& row(int s, int a) const { return rows[s][a]; }
  double prob(int s, int a, int to) const;
  std::uint64_t label(int s) const { return labels[s]; }

  // Mask for a named proposition; throws on unknown names.
  std::uint64_t prop_mask(const std::string& name) const;
};

/// The P-independent part of an MDP: everything a sampling-based reduction
/// is allowed to read.
struct MdpShape {
  int state_count = 0;
  int action_count = 0;
  int initial = 0;
  std::vector<std::string> propositions;
  std::vector<std::string> action_names;
  std::vector<std::uint64_t> labels;
};

MdpShape shape_of(const Mdp& mdp);

/// Dense transition-reward table R(s, a, s').
class RewardTable {
 public:
  RewardTable() = default;
  RewardTable(int states, int actions, double fill = 0.0)
      : states_(states), actions_(actions),
        v_(static_cast<std::size_t>(states) * actions * states, fill) {}

  double& at(int s, int a, int to) {
    return v_[(static_cast<std::size_t>(s) * actions_ + a) * states_ + to];
  }
  double at(int s, int a, int to) const {
    return v_[(static_cast<std::size_t>(s) * actions_ + a) * states_ + to];
  }
  int states() const { return states_; }
  int actions() const { return actions_; }
  double max_abs() const;

 private:
  int states_ = 0;
  int actions_ = 0;
  std::vector<double> v_;
};

/// Per-state discount factor, strictly inside (0, 1). A constant factor is
/// stored without a vector so it can be attached to any MDP.
class Discount {
 public:
  Discount() : constant_(0.5) {}
  explicit Discount(double g) : constant_(g) {}
  explicit Discount(std::vector<double> per_state)
      : constant_(0.0), per_state_(std::move(per_state)) {}

  double at(int s) const { return per_state_ ? (*per_state_)[s] : constant_; }
  bool is_constant() const { return !per_state_.has_value(); }
  double constant() const { return constant_; }
  const std::vector<double>* per_state() const {
    return per_state_ ? &*per_state_ : nullptr;
  }
  double max_over(int state_count) const;
  double min_over(int state_count) const;
  // Throws unless every factor lies strictly in (0, 1).
  void check(int state_count) const;

 private:
  double constant_;
  std::optional<std::vector<double>> per_state_;
};

/// Finite run: a start state followed by (action, next-state) steps.
struct Run {
  int start = 0;
  std::vector<std::pair<int, int>> steps;

  int length() const { return static_cast<int>(steps.size()); }
  int last_state() const { return steps.empty() ? start : steps.back().second; }
  void check_against(const Mdp& mdp) const;
};

/// Ultimately periodic run: prefix followed by a closed cycle. The cycle
/// starts at the prefix's last state and returns to its own start.
struct LassoRun {
  Run prefix;
  Run cycle;

  void check() const;  // structural invariants only
  void check_against(const Mdp& mdp) const;
};

/// Memoryless policy: one distribution over actions per state.
struct PositionalPolicy {
  std::vector<std::vector<double>> probs;  // [s][a]

  static PositionalPolicy uniform(int states, int actions);
  static PositionalPolicy deterministic(std::vector<int> actions, int action_count);
  static PositionalPolicy always(int action, int states, int actions);

  int state_count() const { return static_cast<int>(probs.size()); }
  bool is_deterministic() const;
  int action_at(int s) const;  // argmax; the unique action if deterministic
  void check(int states, int actions) const;
};

/// Policy realized by a finite automaton over observed states. The memory
/// is updated on every newly observed state: after stepping to s', memory
/// becomes update[m][s']; the initial memory is used as-is at the initial
/// state.
struct FiniteMemoryPolicy {
  int memory_count = 1;
  int initial_memory = 0;
  std::vector<std::vector<int>> update;              // [m][s] -> m'
  std::vector<std::vector<std::vector<double>>> act; // [m][s] -> dist over A

  static FiniteMemoryPolicy from_positional(const PositionalPolicy& p, int states);

  void check(int states, int actions) const;
};

/// Named invariant violation; validators return these as data.
struct Violation {
  std::string check;
  int state = -1;
  int action = -1;
  std::string detail;

  std::string to_string() const;
};

// Empty iff all Mdp invariants hold: rows sum to 1 within 1e-9, entries in
// [0,1], indices in range, at most 64 propositions.
std::vector<Violation> validate_mdp(const Mdp& mdp);

// Probability of the cylinder set of `run` under `policy`: the product of
// policy and transition probabilities along the run; 0 if the run does not
// start at the initial state.
double cylinder_prob(const Mdp& mdp, const FiniteMemoryPolicy& policy, const Run& run);
double cylinder_prob(const Mdp& mdp, const PositionalPolicy& policy, const Run& run);

/// Black-box simulator contract: current state, reset to the initial
/// state, and sampling one transition. Single-owner mutable state.
class Simulator {
 public:
  virtual ~Simulator() = default;
  virtual int state() const = 0;
  virtual void reset() = 0;
  virtual int step(int action) = 0;
};

/// Simulator backed by an explicit MDP and a seeded Rng.
class MdpSimulator final : public Simulator {
 public:
  MdpSimulator(const Mdp& mdp, std::uint64_t seed);

  int state() const override { return state_; }
  void reset() override { state_ = mdp_.initial; }
  int step(int action) override;

 private:
  Mdp mdp_;
  Rng rng_;
  int state_;
};

/// Product of an MDP with a finite-memory policy: a product MDP over
/// (state, memory) pairs plus the induced positional policy on it.
struct FoldedPolicy {
  Mdp mdp;                        // states are (s, m) flattened as s * M + m
  PositionalPolicy policy;
  std::vector<int> base_state;    // product index -> s
  std::vector<int> memory_state;  // product index -> m
};

FoldedPolicy fold_policy(const Mdp& mdp, const FiniteMemoryPolicy& policy);

}  // namespace rltrans
