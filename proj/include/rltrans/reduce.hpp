#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "rltrans/mdp.hpp"
#include "rltrans/specs.hpp"

namespace rltrans {

/// Raised when a descriptor violates its own tables at sampling time, which
/// cannot happen for descriptors that pass validation.
struct DescriptorCorruption : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Step-wise sampling-based reduction as an explicit finite tuple
/// (barS, barA, barInitial, barLabels, beta, alpha, q1, q2, specOut).
/// Everything here is independent of the inner transition probabilities;
/// builders receive only an MdpShape.
struct ReductionDescriptor {
  int bar_state_count = 0;
  int bar_action_count = 0;
  int bar_initial = 0;
  std::vector<std::string> bar_propositions;
  std::vector<std::string> bar_action_names;
  std::vector<std::uint64_t> bar_labels;

  // Shape of the inner MDP the descriptor applies to.
  int inner_state_count = 0;
  int inner_action_count = 0;
  int inner_initial = 0;

  std::vector<int> beta;  // [barS] -> inner state stored in barS
  // alpha[barS][barA] -> distribution over inner actions.
  std::vector<std::vector<std::vector<double>>> alpha;
  // q1[barS][barA][barS']: step without sampling the inner MDP.
  std::vector<std::vector<std::vector<double>>> q1;
  // q2[barS][barA][innerA][barS']: unnormalized step weight given the inner
  // action taken and the observed successor class beta(barS').
  std::vector<std::vector<std::vector<std::vector<double>>>> q2;

  Specification spec_out = ReachSpec{};

  double q1_mass(int bs, int ba) const;
};

// Empty iff the descriptor satisfies the definition against the given inner
// shape: beta maps the initial state correctly, q1 never moves across beta
// classes, and the q2 normalization identity holds for every
// (barS, barA, innerA, innerS') within 1e-9.
std::vector<Violation> validate_reduction(const ReductionDescriptor& rd,
                                          const MdpShape& inner);

// The induced transition function: barP(s,a,s') = q1(s,a,s') +
// E_{b~alpha}[q2(s,a,b,s') P(beta(s),b,beta(s'))], assembled into a full
// MDP over the bar state space. Every row sums to 1 for valid descriptors.
Mdp induced_transitions(const ReductionDescriptor& rd, const Mdp& inner);

/// Simulator over the bar space driven by a black-box inner simulator: with
/// probability sum(q1) the step resolves from q1 alone (the inner simulator
/// is not touched); otherwise an inner action is drawn from alpha, the
/// inner simulator steps, and the bar successor is drawn from the q2 slice
/// consistent with the observed inner state. After every step
/// beta(state()) equals the inner simulator's state.
class WrappedSimulator final : public Simulator {
 public:
  WrappedSimulator(ReductionDescriptor rd, Simulator& inner, std::uint64_t seed);

  int state() const override { return state_; }
  void reset() override;
  int step(int bar_action) override;

 private:
  ReductionDescriptor rd_;
  Simulator& inner_;
  Rng rng_;
  int state_;
};

std::unique_ptr<WrappedSimulator> wrap_simulator(const ReductionDescriptor& rd,
                                                 Simulator& inner,
                                                 std::uint64_t seed);

// The product construction translating a reward-machine task into a plain
// transition-reward task on barS = S x U: q1 = 0, the inner action is the
// bar action, and the machine component tracks deterministically.
// `spec` must be DiscountedRmSpec or LimitAvgRmSpec; the output spec is a
// single-state machine with the same aggregation.
ReductionDescriptor product_rm_reduction(const MdpShape& shape, const Specification& spec);

// The state-dependent-discount elimination: per-state discounts gamma(s)
// become the uniform gamma_max by diverting 1 - gamma(s)/gamma_max of each
// step's mass to an absorbing sink (one per state, entered through q1, so
// no inner sample is consumed) and rescaling rewards by gamma_max/gamma(s).
ReductionDescriptor multidiscount_reduction(const MdpShape& shape,
                                            const RewardTable& reward,
                                            const Discount& gamma);

/// MDP-automaton product with automaton nondeterminism resolved into extra
/// actions: bar action (a, k) plays inner action a and takes the k-th
/// automaton successor on the current label. Adds an "acc" proposition
/// marking accepting product states.
struct BuchiProductReduction {
  ReductionDescriptor descriptor;
  std::vector<char> accepting;  // per bar state
};

BuchiProductReduction buchi_product_reduction(const MdpShape& shape,
                                              const BuchiAutomaton& automaton);

// The lambda-sink family over an automaton product: every transition out of
// an accepting state keeps mass lambda, the rest flows to an absorbing sink
// (through q1); the output spec is the limit-average reach encoding of a
// fresh sink proposition.
ReductionDescriptor lambda_sink_reduction(const MdpShape& product_shape,
                                          const std::vector<char>& accepting,
                                          double lambda);

// The two-discount family: accepting states earn 1 - gamma1 under discount
// gamma1, others earn 0 under gamma2; the per-state discounts are then
// eliminated with multidiscount_reduction, so the result is a single
// discounted task at gamma2.
ReductionDescriptor two_discount_reduction(const MdpShape& product_shape,
                                           const std::vector<char>& accepting,
                                           double gamma1, double gamma2);

// Realizes the policy map f: the memory tracks the bar state through
// observed inner states (rejecting descriptors whose tracking is not
// deterministic given (barS, innerS')), and actions are the alpha-marginal
// of the bar policy's choice.
FiniteMemoryPolicy map_policy(const ReductionDescriptor& rd,
                              const PositionalPolicy& bar_policy);
FiniteMemoryPolicy map_policy(const ReductionDescriptor& rd,
                              const FiniteMemoryPolicy& bar_policy);

/// Outcome of an optimality-preservation check.
struct PreservationReport {
  bool exhaustive = false;  // enumerated all deterministic positional bar policies
  bool preserved = true;    // in witness mode: "no violation found"
  double bar_optimal = 0.0;
  double orig_optimal = 0.0;
  long policies_checked = 0;
  std::optional<PositionalPolicy> violating_bar_policy;
  double violating_orig_value = 0.0;
};

// Checks f(Pi_opt(barM, spec')) subset of Pi_opt(M, spec). Enumerates all
// deterministic positional bar policies when |barA|^|barS| <= budget;
// otherwise falls back to the exact optimal witness only (sound for
// "violation found", incomplete for "preserved").
PreservationReport check_optimality_preservation(const Mdp& mdp,
                                                 const Specification& spec,
                                                 const ReductionDescriptor& rd,
                                                 long budget = 1L << 20);

struct SweepPoint {
  double param = 0.0;
  double param2 = 0.0;
  bool preserved = false;
  double bar_optimal = 0.0;
  double mapped_value = 0.0;
  double orig_optimal = 0.0;
};

// For each lambda, builds the sink reduction over `product` (a known-P
// automaton product with `accepting` states) and reports whether optimal
// sink policies map to optimal Buchi policies. The preservation threshold
// depends on P, so it is reported rather than computed a priori.
std::vector<SweepPoint> lambda_sink_sweep(const Mdp& product,
                                          const std::vector<char>& accepting,
                                          std::span<const double> lambdas,
                                          long budget = 1L << 20);

// Same sweep for (gamma1, gamma2) pairs of the two-discount family.
std::vector<SweepPoint> two_discount_sweep(
    const Mdp& product, const std::vector<char>& accepting,
    std::span<const std::pair<double, double>> gammas, long budget = 1L << 20);

}  // namespace rltrans
