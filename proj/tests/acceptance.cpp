// Acceptance suite: one check per shipped guarantee, each printed as a
// single pass/fail line with its runtime. Exit code is nonzero if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "rltrans/io.hpp"
#include "rltrans/learn.hpp"
#include "rltrans/reduce.hpp"
#include "rltrans/refute.hpp"
#include "rltrans/solve.hpp"
#include "test_util.hpp"

using namespace rltrans;
using namespace testutil;

namespace {

struct Criterion {
  std::string name;
  std::function<bool(std::string&)> run;
};

// 1. Induced transition rows are stochastic for 500 random descriptor/P pairs.
bool lemma1_rows(std::string& detail) {
  Rng rng(101);
  for (int trial = 0; trial < 500; ++trial) {
    Mdp m = random_mdp(rng, 2 + static_cast<int>(rng.uniform() * 3),
                       1 + static_cast<int>(rng.uniform() * 3), 1);
    auto rd = random_descriptor(rng, shape_of(m),
                                static_cast<int>(rng.uniform() * 3),
                                1 + static_cast<int>(rng.uniform() * 3));
    if (!validate_reduction(rd, shape_of(m)).empty()) {
      detail = "descriptor generator produced an invalid descriptor";
      return false;
    }
    Mdp bar = induced_transitions(rd, m);
    for (int bs = 0; bs < bar.state_count; ++bs)
      for (int ba = 0; ba < bar.action_count; ++ba) {
        double sum = 0.0;
        for (const auto& t : bar.rows[bs][ba]) sum += t.prob;
        if (std::fabs(sum - 1.0) > 1e-9) {
          detail = "row sum " + format_double(sum);
          return false;
        }
      }
  }
  detail = "500 descriptor/P pairs, all rows within 1e-9";
  return true;
}

// 2. Wrapped-simulator statistics match the induced transition function.
bool algorithm1_fidelity(std::string& detail) {
  Rng rng(202);
  long checked = 0, within = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Mdp m = random_mdp(rng, 2 + static_cast<int>(rng.uniform() * 3), 2, 1);
    auto rd = random_descriptor(rng, shape_of(m),
                                static_cast<int>(rng.uniform() * 3), 2);
    Mdp bar = induced_transitions(rd, m);
    MdpSimulator inner(m, mix_seed(77, trial));
    auto wrapped = wrap_simulator(rd, inner, mix_seed(78, trial));
    Rng actions(mix_seed(79, trial));
    std::vector<std::vector<std::vector<long>>> counts(
        bar.state_count,
        std::vector<std::vector<long>>(bar.action_count,
                                       std::vector<long>(bar.state_count, 0)));
    std::vector<std::vector<long>> visits(bar.state_count,
                                          std::vector<long>(bar.action_count, 0));
    for (long i = 0; i < 100000; ++i) {
      if (i % 250 == 0) wrapped->reset();
      int bs = wrapped->state();
      int ba = static_cast<int>(actions.uniform() * bar.action_count);
      int bt = wrapped->step(ba);
      ++counts[bs][ba][bt];
      ++visits[bs][ba];
    }
    for (int bs = 0; bs < bar.state_count; ++bs)
      for (int ba = 0; ba < bar.action_count; ++ba) {
        if (visits[bs][ba] < 500) continue;
        for (int bt = 0; bt < bar.state_count; ++bt) {
          double p = bar.prob(bs, ba, bt);
          double freq = static_cast<double>(counts[bs][ba][bt]) / visits[bs][ba];
          double sigma = std::sqrt(p * (1.0 - p) / visits[bs][ba]);
          ++checked;
          within += std::fabs(freq - p) <= 3.0 * sigma + 1e-12;
        }
      }
  }
  double fraction = static_cast<double>(within) / static_cast<double>(checked);
  detail = std::to_string(within) + "/" + std::to_string(checked) +
           " entries within 3 sigma (" + format_double(fraction) + ")";
  return fraction >= 0.95;
}

// 3. Product-reduction value preservation and optimality preservation.
bool example1_preservation(std::string& detail) {
  Rng rng(303);
  for (int trial = 0; trial < 200; ++trial) {
    int states = 2 + static_cast<int>(rng.uniform() * 4);
    int actions = 2 + static_cast<int>(rng.uniform() * 2);
    int machine_states = 1 + static_cast<int>(rng.uniform() * 3);
    Mdp m = random_mdp(rng, states, actions, 1);
    auto rm = random_rm(rng, machine_states, states, actions);
    for (bool discounted : {true, false}) {
      Specification spec =
          discounted ? Specification{DiscountedRmSpec{rm, Discount(0.9)}}
                     : Specification{LimitAvgRmSpec{rm}};
      auto rd = product_rm_reduction(shape_of(m), spec);
      Mdp bar = induced_transitions(rd, m);
      for (int k = 0; k < 10; ++k) {
        auto bar_pol = k % 2 == 0
                           ? random_det_policy(rng, bar.state_count, actions)
                           : random_stochastic_policy(rng, bar.state_count, actions);
        double lhs = spec_value(bar, rd.spec_out, bar_pol);
        double rhs = spec_value(m, spec, map_policy(rd, bar_pol));
        if (std::fabs(lhs - rhs) > 1e-9) {
          detail = "value mismatch " + format_double(lhs) + " vs " + format_double(rhs);
          return false;
        }
      }
      auto report = check_optimality_preservation(m, spec, rd, 1 << 12);
      if (!report.preserved) {
        detail = "preservation violated at trial " + std::to_string(trial);
        return false;
      }
    }
  }
  detail = "200 instances x 2 aggregations x 10 policies, equal within 1e-9";
  return true;
}

// 4. State-dependent discounting eliminates exactly.
bool theorem5_composition(std::string& detail) {
  Rng rng(404);
  for (int trial = 0; trial < 200; ++trial) {
    int states = 2 + static_cast<int>(rng.uniform() * 4);
    Mdp m = random_mdp(rng, states, 2, 1);
    RewardTable reward = random_reward(rng, states, 2);
    std::vector<double> per_state(states);
    for (int s = 0; s < states; ++s) per_state[s] = 0.3 + 0.65 * rng.uniform();
    Discount gamma(per_state);
    auto rd = multidiscount_reduction(shape_of(m), reward, gamma);
    Mdp bar = induced_transitions(rd, m);
    RewardMachine flat;
    flat.rm_state_count = 1;
    flat.initial = 0;
    flat.update.assign(1, std::vector<int>(states, 0));
    flat.rewards = {reward};
    Specification direct = DiscountedRmSpec{flat, gamma};
    for (int k = 0; k < 5; ++k) {
      auto bar_pol = random_det_policy(rng, bar.state_count, 2);
      double composed = spec_value(bar, rd.spec_out, bar_pol);
      double straight = spec_value(m, direct, map_policy(rd, bar_pol));
      if (std::fabs(composed - straight) > 1e-9) {
        detail = "mismatch " + format_double(composed - straight);
        return false;
      }
    }
  }
  detail = "200 instances, composed and direct values within 1e-9";
  return true;
}

// 5. The trigger machines encode reach/safe probabilities exactly.
bool theorem2_encoding(std::string& detail) {
  Rng rng(505);
  for (int trial = 0; trial < 200; ++trial) {
    int states = 2 + static_cast<int>(rng.uniform() * 5);
    Mdp m = random_mdp(rng, states, 2, 1);
    auto reach_arm = build_reach_arm_mask(1, 1);
    auto safe_arm = build_safe_arm_mask(1, 1);
    auto target = label_intersects(m, 1);
    std::vector<char> unsafe(states);
    for (int s = 0; s < states; ++s) unsafe[s] = !target[s];
    for (const auto& pol : all_det_policies(states, 2)) {
      auto chain = induced_chain(m, pol);
      double exact_reach = chain_reach_prob(chain, target)[m.initial];
      double avg_reach = spec_value(m, LimitAvgRmSpec{reach_arm}, pol);
      if (std::fabs(avg_reach - exact_reach) > 1e-9) {
        detail = "reach mismatch " + format_double(avg_reach - exact_reach);
        return false;
      }
      double exact_safe = 1.0 - chain_reach_prob(chain, unsafe)[m.initial];
      double avg_safe = spec_value(m, LimitAvgRmSpec{safe_arm}, pol);
      if (std::fabs(avg_safe - exact_safe) > 1e-9) {
        detail = "safe mismatch " + format_double(avg_safe - exact_safe);
        return false;
      }
    }
  }
  detail = "200 instances x all deterministic policies, both encodings exact";
  return true;
}

// 6. The discounted-machine counterexample synthesizer verifies everywhere.
bool theorem1_reproduction(std::string& detail) {
  auto canonical = synthesize_thm1_counterexample(fig1_enter_b_rm(), 0.5);
  if (!canonical.all_pass()) {
    detail = "canonical machine failed";
    return false;
  }
  RewardMachine constant;
  constant.rm_state_count = 1;
  constant.initial = 0;
  constant.normalized = true;
  constant.update.assign(1, std::vector<int>(4, 0));
  constant.rewards.assign(1, RewardTable(4, 2, 0.25));
  if (!synthesize_thm1_counterexample(constant, 0.9).all_pass()) {
    detail = "constant machine failed";
    return false;
  }
  Rng rng(606);
  for (int trial = 0; trial < 100; ++trial) {
    auto rm = random_rm(rng, 1 + static_cast<int>(rng.uniform() * 3), 4, 2);
    for (double gamma : {0.5, 0.9}) {
      auto report = synthesize_thm1_counterexample(rm, gamma);
      if (!report.all_pass()) {
        detail = "random machine " + std::to_string(trial) + " at gamma " +
                 format_double(gamma);
        return false;
      }
    }
  }
  detail = "canonical + constant + 100 random machines at gamma in {0.5, 0.9}";
  return true;
}

// 7. The limit-average machine counterexample verifies everywhere.
bool theorem3_reproduction(std::string& detail) {
  if (!analyze_arm_for_buchi(build_reach_arm({"b"}, {"b"})).report.all_pass()) {
    detail = "trigger machine failed";
    return false;
  }
  Rng rng(707);
  for (int trial = 0; trial < 100; ++trial) {
    auto arm = random_arm(rng, 1 + static_cast<int>(rng.uniform() * 4), 1);
    auto result = analyze_arm_for_buchi(arm);
    if (!result.report.all_pass()) {
      detail = "random machine " + std::to_string(trial);
      return false;
    }
  }
  detail = "trigger machine + 100 random machines, all witnesses verified";
  return true;
}

// 8. Perturbed safety optima are disjoint from the unperturbed eps-optima.
bool theorem6_reproduction(std::string& detail) {
  for (double delta : {0.01, 0.1, 0.2})
    for (double eps : {0.5, 0.9}) {
      auto report = robustness_experiment(delta, eps);
      if (!report.all_pass()) {
        detail = "delta " + format_double(delta) + " eps " + format_double(eps);
        return false;
      }
      if (std::fabs(report.quantities.at("optimumM") - 1.0) > 1e-9 ||
          std::fabs(report.quantities.at("optimumMdelta") - delta) > 1e-9) {
        detail = "optimum equalities violated at delta " + format_double(delta);
        return false;
      }
    }
  detail = "delta in {0.01, 0.1, 0.2} x eps in {0.5, 0.9}, all disjoint";
  return true;
}

// 9. The coupled indistinguishability experiment at full scale.
bool theorem8_experiment(std::string& detail) {
  auto report = pac_indistinguishability_experiment(PacLearner::ModelBased, 0.25, 21,
                                                    0.0, 1000, 0);
  double pr1 = report.quantities.at("prG1");
  double pr2 = report.quantities.at("prG2");
  detail = "Pr(G1) = " + format_double(pr1) + ", Pr(G2) = " + format_double(pr2);
  if (pr1 < 0.87 || pr1 > 0.93 || pr2 < 0.87 || pr2 > 0.93) return false;
  return report.all_pass();
}

// 10. Q-learning reaches near-optimal policies on random MDPs.
bool learner_sanity(std::string& detail) {
  Rng rng(0);
  for (int trial = 0; trial < 5; ++trial) {
    Mdp m = random_mdp(rng, 5, 2, 1);
    RewardTable r = random_reward(rng, 5, 2);
    MdpSimulator sim(m, 0);
    LearnerConfig cfg;
    cfg.seed = 0;
    cfg.step_budget = 1000000;
    cfg.eval_every = 1000000;
    auto result = q_learning(sim, 5, 2, r, 0.9, cfg);
    auto vi = value_iteration_discounted(m, r, Discount(0.9), 1e-9);
    PositionalPolicy greedy{result.trace.snapshots.back().policy.act[0]};
    double learned = discounted_value(m, r, Discount(0.9), greedy)[m.initial];
    if (std::fabs(vi.value[m.initial] - learned) > 0.05) {
      detail = "gap " + format_double(vi.value[m.initial] - learned) + " at trial " +
               std::to_string(trial);
      return false;
    }
  }
  detail = "5 random MDPs, final greedy policy within 0.05 of the optimum";
  return true;
}

// 11. The MEC-based Buchi oracle equals exhaustive policy enumeration.
bool buchi_cross_validation(std::string& detail) {
  Rng rng(1111);
  for (int trial = 0; trial < 100; ++trial) {
    int states = 2 + static_cast<int>(rng.uniform() * 3);
    Mdp m = random_mdp(rng, states, 2, 1);
    std::vector<char> accepting(states, 0);
    for (int s = 0; s < states; ++s) accepting[s] = rng.uniform() < 0.4;
    double exact = max_buchi_prob(m, accepting).value[m.initial];
    double brute = buchi_enumeration_best(m, accepting);
    if (std::fabs(exact - brute) > 1e-9) {
      detail = "mismatch " + format_double(exact - brute) + " at trial " +
               std::to_string(trial);
      return false;
    }
  }
  detail = "100 random MDPs, MEC oracle equals enumeration within 1e-9";
  return true;
}

// 12. Re-running the experiment suite yields byte-identical reports.
bool determinism(std::string& detail) {
  auto run_suite = [] {
    std::vector<std::string> blobs;
    auto thm1 = synthesize_thm1_counterexample(fig1_enter_b_rm(), 0.5);
    blobs.push_back(experiment_to_json(thm1).dump(2));
    blobs.push_back(experiment_to_csv(thm1));
    auto thm3 = analyze_arm_for_buchi(build_reach_arm({"b"}, {"b"}));
    blobs.push_back(experiment_to_json(thm3.report).dump(2));
    blobs.push_back(experiment_to_csv(thm3.report));
    auto robust = robustness_experiment(0.1, 0.5);
    blobs.push_back(experiment_to_json(robust).dump(2));
    blobs.push_back(experiment_to_csv(robust));
    auto pac = pac_indistinguishability_experiment(PacLearner::ModelBased, 0.25, 21,
                                                   0.0, 100, 7);
    blobs.push_back(experiment_to_json(pac).dump(2));
    blobs.push_back(experiment_to_csv(pac));
    return blobs;
  };
  auto first = run_suite();
  auto second = run_suite();
  if (first != second) {
    detail = "rerun produced different bytes";
    return false;
  }
  detail = "thm1/thm3/robustness/pac reports byte-identical across reruns";
  return true;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {"induced transition rows are stochastic (500 random pairs)", lemma1_rows},
      {"wrapped simulator matches induced transitions (20 x 1e5 steps)",
       algorithm1_fidelity},
      {"product reduction preserves values and optimality (200 instances)",
       example1_preservation},
      {"state-dependent discount elimination is exact (200 instances)",
       theorem5_composition},
      {"trigger machines encode reach/safe probabilities (200 instances)",
       theorem2_encoding},
      {"discounted-machine counterexample synthesis verifies (202 runs)",
       theorem1_reproduction},
      {"limit-average machine counterexample analysis verifies (101 runs)",
       theorem3_reproduction},
      {"perturbed safety optima are disjoint from eps-optima (6 settings)",
       theorem6_reproduction},
      {"coupled indistinguishability experiment (1000 trials)", theorem8_experiment},
      {"q-learning reaches near-optimal policies (5 x 1e6 steps)", learner_sanity},
      {"Buchi oracle equals exhaustive enumeration (100 MDPs)",
       buchi_cross_validation},
      {"experiment suite is byte-identical across reruns", determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = criteria[i].run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                start)
                      .count();
    std::printf("[%s] %2zu. %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", i + 1,
                criteria[i].name.c_str(), secs, detail.empty() ? "" : " -- ",
                detail.c_str());
    failures += !ok;
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
