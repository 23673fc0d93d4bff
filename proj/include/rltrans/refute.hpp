#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rltrans/learn.hpp"
#include "rltrans/mdp.hpp"
#include "rltrans/specs.hpp"

namespace rltrans {

struct ExperimentVerdict {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Structured outcome of a counterexample or learning experiment:
/// parameters in, computed quantities and pass/fail verdicts out. The
/// verdicts are derivable from the recorded quantities.
struct ExperimentReport {
  std::string name;
  std::map<std::string, double> parameters;
  std::map<std::string, double> quantities;
  std::vector<ExperimentVerdict> verdicts;
  std::vector<std::uint64_t> seeds;
  std::vector<std::map<std::string, double>> rows;  // per trial / grid point
  std::vector<std::string> notes;

  bool all_pass() const;
  void require(const std::string& name, bool pass, const std::string& detail = "");
};

// The two-action family with one rewarding detour: b holds at s1 only;
// a1 at s0 reaches s1 with probability p1, a2 goes through s2 which leaks
// to s1 at rate 1-p3; s1 and s3 are absorbing. Action restrictions at
// s1..s3 are modeled by aliasing the second action to the first, which
// keeps the two-policy structure of the construction intact.
Mdp fig1_mdp(double p1, double p2, double p3);

// Safety counterexample family: b holds at s0 and s2; a1 loops at s0 with
// probability p1, a2 moves to the absorbing safe state s2 with probability
// 1-p2 (and to the absorbing unsafe s1 otherwise).
Mdp fig3_mdp(double p1, double p2);

// PAC indistinguishability family: b holds at s0 and s2; a1 loops at s0
// with probability p1, a2 moves surely to s2, which self-loops with
// probability p2 and falls to the absorbing unsafe s1 otherwise.
Mdp fig4_mdp(double p1, double p2);

// Mechanizes the discounted-reward-machine impossibility construction: for
// a normalized machine over the fig1 shape, either the two canonical lasso
// returns tie (immediate witness at p=1) or transition probabilities are
// synthesized from the proof inequalities; the emitted witness is verified
// by exact product evaluation, never trusted from construction.
ExperimentReport synthesize_thm1_counterexample(const RewardMachine& rm, double gamma);

// The canonical machine for the above: reward 1 exactly on transitions
// entering the b-labeled state of fig1.
RewardMachine fig1_enter_b_rm();

struct ArmCycle {
  std::vector<int> states;  // u_1 .. u_k
  std::vector<int> masks;   // l_1 .. l_k (label read when leaving u_i)
  double avg = 0.0;
  bool positive = false;  // all labels {b}
  bool negative = false;  // all labels empty
};

/// Cycle structure of an ARM over the single proposition b, plus the
/// synthesized witness plan for the limit-average impossibility argument.
struct CycleAnalysis {
  std::vector<ArmCycle> cycles;
  std::vector<std::vector<int>> bottom_sccs;
  double gap_epsilon = 0.0;
  bool immediate = false;  // a positive/negative pair already ties or flips
  // Padded-witness plan (when not immediate):
  ArmCycle negative_cycle;   // C-
  ArmCycle companion_cycle;  // C, starts at C-'s head with a b-labeled edge
  long repetitions = 0;      // m
  double branch_prob = 0.0;  // p
};

struct Thm3Result {
  CycleAnalysis analysis;
  ExperimentReport report;
  Mdp witness;
};

// Mechanizes the limit-average ARM impossibility construction for "b holds
// infinitely often": enumerates simple cycles, finds either an immediate
// two-branch witness or the padded cycle construction, builds the witness
// MDP, and verifies the value flip with the exact limit-average and Buchi
// oracles (which share no code with the cycle arithmetic here).
Thm3Result analyze_arm_for_buchi(const AbstractRewardMachine& arm);

// Non-robustness of safety: the optimal policies of the delta-perturbed
// fig3 are computed exactly and shown to be outside the eps-optimal set of
// the unperturbed MDP (their value drops to 0). delta = 0 is the degenerate
// control where the intersection is nonempty.
ExperimentReport robustness_experiment(double delta, double eps);

enum class PacLearner { ModelBased, QAdapter };

// The PAC indistinguishability experiment: coupled learner runs on the
// fig4 family and its two delta-perturbations, using shared uniform draws.
// Records the per-trial event that every draw stayed below 1-delta (in
// which case all observed transitions match the deterministic fig4), the
// eps-optimality pattern of emitted policies, a delta=0 bit-identity
// control, and the closed-form stationary-policy grid check that no policy
// is eps-optimal in both perturbations. delta <= 0 selects the default
// 1 - 0.9^(1/K).
ExperimentReport pac_indistinguishability_experiment(PacLearner learner, double eps,
                                                     int K, double delta, int trials,
                                                     std::uint64_t seed);

}  // namespace rltrans
