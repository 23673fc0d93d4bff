#include "rltrans/reduce.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

namespace rltrans {

namespace {

std::vector<std::vector<double>> point_mass_alpha(int bar_actions, int inner_actions,
                                                  const std::vector<int>& inner_of_bar) {
  std::vector<std::vector<double>> rows(bar_actions,
                                        std::vector<double>(inner_actions, 0.0));
  for (int ba = 0; ba < bar_actions; ++ba) rows[ba][inner_of_bar[ba]] = 1.0;
  return rows;
}

std::string fresh_prop_name(const std::vector<std::string>& props, std::string base) {
  while (std::find(props.begin(), props.end(), base) != props.end()) base += "_";
  return base;
}

void check_shape_sizes(const ReductionDescriptor& rd) {
  if (rd.bar_state_count <= 0 || rd.bar_action_count <= 0 ||
      rd.inner_state_count <= 0 || rd.inner_action_count <= 0)
    throw std::invalid_argument("descriptor has empty state or action space");
  auto bad = [] { throw std::invalid_argument("descriptor table size mismatch"); };
  if (static_cast<int>(rd.beta.size()) != rd.bar_state_count) bad();
  if (static_cast<int>(rd.bar_labels.size()) != rd.bar_state_count) bad();
  if (static_cast<int>(rd.alpha.size()) != rd.bar_state_count ||
      static_cast<int>(rd.q1.size()) != rd.bar_state_count ||
      static_cast<int>(rd.q2.size()) != rd.bar_state_count)
    bad();
  for (int bs = 0; bs < rd.bar_state_count; ++bs) {
    if (static_cast<int>(rd.alpha[bs].size()) != rd.bar_action_count ||
        static_cast<int>(rd.q1[bs].size()) != rd.bar_action_count ||
        static_cast<int>(rd.q2[bs].size()) != rd.bar_action_count)
      bad();
    for (int ba = 0; ba < rd.bar_action_count; ++ba) {
      if (static_cast<int>(rd.alpha[bs][ba].size()) != rd.inner_action_count) bad();
      if (static_cast<int>(rd.q1[bs][ba].size()) != rd.bar_state_count) bad();
      if (static_cast<int>(rd.q2[bs][ba].size()) != rd.inner_action_count) bad();
      for (int a = 0; a < rd.inner_action_count; ++a)
        if (static_cast<int>(rd.q2[bs][ba][a].size()) != rd.bar_state_count) bad();
    }
  }
}

}  // namespace

namespace {

// Builders assert their own normalization identities; a failure here is a
// construction bug, not bad input.
void assert_constructed_valid(const ReductionDescriptor& rd, const MdpShape& shape) {
  auto violations = validate_reduction(rd, shape);
  if (!violations.empty())
    throw NumericsError("constructed descriptor violates its invariants: " +
                        violations.front().to_string());
}

}  // namespace

double ReductionDescriptor::q1_mass(int bs, int ba) const {
  double p = 0.0;
  for (double x : q1[bs][ba]) p += x;
  return p;
}

std::vector<Violation> validate_reduction(const ReductionDescriptor& rd,
                                          const MdpShape& inner) {
  std::vector<Violation> out;
  check_shape_sizes(rd);
  if (rd.inner_state_count != inner.state_count ||
      rd.inner_action_count != inner.action_count ||
      rd.inner_initial != inner.initial) {
    out.push_back({"inner-shape-mismatch", -1, -1, ""});
    return out;
  }
  for (int bs = 0; bs < rd.bar_state_count; ++bs)
    if (rd.beta[bs] < 0 || rd.beta[bs] >= inner.state_count)
      out.push_back({"beta-out-of-range", bs, -1, ""});
  if (!out.empty()) return out;

  if (rd.bar_initial < 0 || rd.bar_initial >= rd.bar_state_count)
    out.push_back({"bar-initial-out-of-range", rd.bar_initial, -1, ""});
  else if (rd.beta[rd.bar_initial] != inner.initial)
    out.push_back({"beta-initial", rd.bar_initial,
                   -1, "beta(bar initial) != inner initial"});

  auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
  for (int bs = 0; bs < rd.bar_state_count; ++bs) {
    for (int ba = 0; ba < rd.bar_action_count; ++ba) {
      double alpha_sum = 0.0;
      for (double x : rd.alpha[bs][ba]) {
        if (!in01(x)) out.push_back({"alpha-out-of-range", bs, ba, ""});
        alpha_sum += x;
      }
      if (std::fabs(alpha_sum - 1.0) > kProbTol)
        out.push_back({"alpha-row-sum", bs, ba, std::to_string(alpha_sum)});

      double p = 0.0;
      for (int bt = 0; bt < rd.bar_state_count; ++bt) {
        double x = rd.q1[bs][ba][bt];
        if (!in01(x)) out.push_back({"q1-out-of-range", bs, ba, ""});
        if (x > 0.0 && rd.beta[bt] != rd.beta[bs])
          out.push_back({"q1-crosses-beta-classes", bs, ba,
                         "target " + std::to_string(bt)});
        p += x;
      }
      if (p > 1.0 + kProbTol)
        out.push_back({"q1-mass-exceeds-one", bs, ba, std::to_string(p)});

      for (int a = 0; a < rd.inner_action_count; ++a) {
        for (int bt = 0; bt < rd.bar_state_count; ++bt)
          if (!in01(rd.q2[bs][ba][a][bt]))
            out.push_back({"q2-out-of-range", bs, ba, ""});
        // Normalization identity: for every observed inner successor, the
        // q2 mass over its beta-preimage equals 1 - sum(q1).
        for (int t = 0; t < inner.state_count; ++t) {
          double mass = 0.0;
          for (int bt = 0; bt < rd.bar_state_count; ++bt)
            if (rd.beta[bt] == t) mass += rd.q2[bs][ba][a][bt];
          if (std::fabs(mass - (1.0 - p)) > kProbTol)
            out.push_back({"q2-normalization", bs, ba,
                           "inner action " + std::to_string(a) + " successor " +
                               std::to_string(t) + " mass " + std::to_string(mass)});
        }
      }
    }
  }
  return out;
}

Mdp induced_transitions(const ReductionDescriptor& rd, const Mdp& inner) {
  auto inner_violations = validate_mdp(inner);
  if (!inner_violations.empty())
    throw std::invalid_argument("invalid inner MDP: " +
                                inner_violations.front().to_string());
  auto violations = validate_reduction(rd, shape_of(inner));
  if (!violations.empty())
    throw std::invalid_argument("invalid descriptor: " + violations.front().to_string());

  Mdp out;
  out.state_count = rd.bar_state_count;
  out.action_count = rd.bar_action_count;
  out.initial = rd.bar_initial;
  out.propositions = rd.bar_propositions;
  out.action_names = rd.bar_action_names;
  out.labels = rd.bar_labels;
  out.rows.assign(out.state_count,
                  std::vector<std::vector<Transition>>(out.action_count));
  for (int bs = 0; bs < rd.bar_state_count; ++bs)
    for (int ba = 0; ba < rd.bar_action_count; ++ba) {
      std::vector<double> dense(rd.bar_state_count, 0.0);
      for (int bt = 0; bt < rd.bar_state_count; ++bt) dense[bt] = rd.q1[bs][ba][bt];
      for (int a = 0; a < rd.inner_action_count; ++a) {
        double pa = rd.alpha[bs][ba][a];
        if (pa == 0.0) continue;
        for (int bt = 0; bt < rd.bar_state_count; ++bt) {
          double q = rd.q2[bs][ba][a][bt];
          if (q == 0.0) continue;
          dense[bt] += pa * q * inner.prob(rd.beta[bs], a, rd.beta[bt]);
        }
      }
      for (int bt = 0; bt < rd.bar_state_count; ++bt)
        if (dense[bt] > 0.0) out.rows[bs][ba].push_back({bt, dense[bt]});
    }
  auto out_violations = validate_mdp(out);
  if (!out_violations.empty())
    throw NumericsError("induced transition function invalid: " +
                        out_violations.front().to_string());
  return out;
}

WrappedSimulator::WrappedSimulator(ReductionDescriptor rd, Simulator& inner,
                                   std::uint64_t seed)
    : rd_(std::move(rd)), inner_(inner), rng_(seed), state_(rd_.bar_initial) {
  check_shape_sizes(rd_);
  inner_.reset();
}

void WrappedSimulator::reset() {
  inner_.reset();
  state_ = rd_.bar_initial;
}

int WrappedSimulator::step(int bar_action) {
  if (bar_action < 0 || bar_action >= rd_.bar_action_count)
    throw std::out_of_range("bar action out of range");
  const int bs = state_;
  const double p = rd_.q1_mass(bs, bar_action);
  if (rng_.uniform() < p) {
    state_ = rng_.sample(rd_.q1[bs][bar_action]);
    return state_;
  }
  int a = rng_.sample(rd_.alpha[bs][bar_action]);
  int inner_next = inner_.step(a);
  std::vector<double> weights(rd_.bar_state_count, 0.0);
  double total = 0.0;
  for (int bt = 0; bt < rd_.bar_state_count; ++bt) {
    if (rd_.beta[bt] != inner_next) continue;
    weights[bt] = rd_.q2[bs][bar_action][a][bt];
    total += weights[bt];
  }
  if (!(total > 0.0))
    throw DescriptorCorruption(
        "empty q2 slice for inner action " + std::to_string(a) +
        " successor " + std::to_string(inner_next));
  state_ = rng_.sample(weights);
  return state_;
}

std::unique_ptr<WrappedSimulator> wrap_simulator(const ReductionDescriptor& rd,
                                                 Simulator& inner,
                                                 std::uint64_t seed) {
  return std::make_unique<WrappedSimulator>(rd, inner, seed);
}

namespace {

ReductionDescriptor identity_skeleton(const MdpShape& shape, int bar_states,
                                      int bar_actions) {
  ReductionDescriptor rd;
  rd.bar_state_count = bar_states;
  rd.bar_action_count = bar_actions;
  rd.inner_state_count = shape.state_count;
  rd.inner_action_count = shape.action_count;
  rd.inner_initial = shape.initial;
  rd.bar_propositions = shape.propositions;
  rd.beta.assign(bar_states, 0);
  rd.bar_labels.assign(bar_states, 0);
  rd.q1.assign(bar_states,
               std::vector<std::vector<double>>(
                   bar_actions, std::vector<double>(bar_states, 0.0)));
  rd.q2.assign(bar_states,
               std::vector<std::vector<std::vector<double>>>(
                   bar_actions, std::vector<std::vector<double>>(
                                    shape.action_count,
                                    std::vector<double>(bar_states, 0.0))));
  return rd;
}

}  // namespace

ReductionDescriptor product_rm_reduction(const MdpShape& shape, const Specification& spec) {
  const RewardMachineLike* machine = nullptr;
  const Discount* gamma = nullptr;
  bool discounted = false;
  if (const auto* d = std::get_if<DiscountedRmSpec>(&spec)) {
    machine = &d->machine;
    gamma = &d->gamma;
    discounted = true;
  } else if (const auto* l = std::get_if<LimitAvgRmSpec>(&spec)) {
    machine = &l->machine;
  } else {
    throw std::invalid_argument(
        "product reduction applies to reward machine specifications");
  }

  RewardMachine rm;
  if (std::holds_alternative<AbstractRewardMachine>(*machine))
    rm = to_reward_machine(std::get<AbstractRewardMachine>(*machine), shape);
  else
    rm = std::get<RewardMachine>(*machine);
  rm.check(shape.state_count, shape.action_count);
  const int U = rm.rm_state_count;
  const int n = shape.state_count;
  const int A = shape.action_count;

  ReductionDescriptor rd = identity_skeleton(shape, n * U, A);
  rd.bar_action_names = shape.action_names;
  rd.bar_initial = shape.initial * U + rm.initial;
  std::vector<int> same_action(A);
  for (int a = 0; a < A; ++a) same_action[a] = a;
  rd.alpha.assign(n * U, point_mass_alpha(A, A, same_action));
  for (int s = 0; s < n; ++s)
    for (int u = 0; u < U; ++u) {
      int bs = s * U + u;
      rd.beta[bs] = s;
      rd.bar_labels[bs] = shape.labels[s];
      for (int ba = 0; ba < A; ++ba)
        for (int a = 0; a < A; ++a)
          for (int t = 0; t < n; ++t)
            rd.q2[bs][ba][a][t * U + rm.next(u, t)] = 1.0;
    }

  // Output spec: single-state machine with the transition rewards read off
  // the bar source's machine component, same aggregation as the input.
  RewardMachine flat;
  flat.rm_state_count = 1;
  flat.initial = 0;
  flat.normalized = rm.normalized;
  flat.update.assign(1, std::vector<int>(n * U, 0));
  flat.rewards.assign(1, RewardTable(n * U, A));
  for (int bs = 0; bs < n * U; ++bs)
    for (int a = 0; a < A; ++a)
      for (int bt = 0; bt < n * U; ++bt)
        flat.rewards[0].at(bs, a, bt) = rm.reward(bs % U, bs / U, a, bt / U);
  if (discounted) {
    std::vector<double> g(n * U);
    for (int bs = 0; bs < n * U; ++bs) g[bs] = gamma->at(bs / U);
    rd.spec_out = DiscountedRmSpec{flat, Discount(g)};
  } else {
    rd.spec_out = LimitAvgRmSpec{flat};
  }
  assert_constructed_valid(rd, shape);
  return rd;
}

ReductionDescriptor multidiscount_reduction(const MdpShape& shape,
                                            const RewardTable& reward,
                                            const Discount& gamma) {
  gamma.check(shape.state_count);
  if (reward.states() != shape.state_count || reward.actions() != shape.action_count)
    throw std::invalid_argument("reward table shape mismatch");
  const int n = shape.state_count;
  const int A = shape.action_count;
  const double gmax = gamma.max_over(n);

  // One absorbing sink per state with leftover mass, entered through q1 so
  // the inner simulator is not sampled on the sink branch.
  std::vector<int> sink_of(n, -1);
  int bar = n;
  for (int s = 0; s < n; ++s)
    if (1.0 - gamma.at(s) / gmax > 0.0) sink_of[s] = bar++;

  ReductionDescriptor rd = identity_skeleton(shape, bar, A);
  rd.bar_action_names = shape.action_names;
  rd.bar_initial = shape.initial;
  std::vector<int> same_action(A);
  for (int a = 0; a < A; ++a) same_action[a] = a;
  rd.alpha.assign(bar, point_mass_alpha(A, A, same_action));
  for (int s = 0; s < n; ++s) {
    rd.beta[s] = s;
    rd.bar_labels[s] = shape.labels[s];
    double keep = gamma.at(s) / gmax;
    for (int ba = 0; ba < A; ++ba) {
      if (sink_of[s] >= 0) rd.q1[s][ba][sink_of[s]] = 1.0 - keep;
      for (int a = 0; a < A; ++a)
        for (int t = 0; t < n; ++t) rd.q2[s][ba][a][t] = keep;
    }
  }
  for (int s = 0; s < n; ++s) {
    if (sink_of[s] < 0) continue;
    int bs = sink_of[s];
    rd.beta[bs] = s;
    rd.bar_labels[bs] = 0;
    for (int ba = 0; ba < A; ++ba) rd.q1[bs][ba][bs] = 1.0;
  }

  RewardMachine flat;
  flat.rm_state_count = 1;
  flat.initial = 0;
  flat.update.assign(1, std::vector<int>(bar, 0));
  flat.rewards.assign(1, RewardTable(bar, A));
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < A; ++a)
      for (int t = 0; t < n; ++t)
        flat.rewards[0].at(s, a, t) = (gmax / gamma.at(s)) * reward.at(s, a, t);
  rd.spec_out = DiscountedRmSpec{flat, Discount(gmax)};
  assert_constructed_valid(rd, shape);
  return rd;
}

BuchiProductReduction buchi_product_reduction(const MdpShape& shape,
                                              const BuchiAutomaton& automaton) {
  automaton.check();
  if (automaton.prop_count != static_cast<int>(shape.propositions.size()))
    throw std::invalid_argument("automaton proposition space mismatch");
  const int n = shape.state_count;
  const int A = shape.action_count;
  const int Q = automaton.state_count;
  int K = 1;
  for (const auto& per_state : automaton.next)
    for (const auto& succ : per_state) K = std::max(K, static_cast<int>(succ.size()));

  BuchiProductReduction out;
  ReductionDescriptor& rd = out.descriptor;
  rd = identity_skeleton(shape, n * Q, A * K);
  rd.bar_initial = shape.initial * Q + automaton.initial;
  rd.bar_propositions.push_back(fresh_prop_name(shape.propositions, "acc"));
  const std::uint64_t acc_bit = std::uint64_t{1}
                                << (rd.bar_propositions.size() - 1);
  if (!shape.action_names.empty()) {
    for (int a = 0; a < A; ++a)
      for (int k = 0; k < K; ++k)
        rd.bar_action_names.push_back(shape.action_names[a] + "#" + std::to_string(k));
  }
  out.accepting.assign(n * Q, 0);

  std::vector<int> inner_of_bar(A * K);
  for (int a = 0; a < A; ++a)
    for (int k = 0; k < K; ++k) inner_of_bar[a * K + k] = a;
  rd.alpha.assign(n * Q, point_mass_alpha(A * K, A, inner_of_bar));

  for (int s = 0; s < n; ++s)
    for (int q = 0; q < Q; ++q) {
      int bs = s * Q + q;
      rd.beta[bs] = s;
      rd.bar_labels[bs] = shape.labels[s] | (automaton.accepting[q] ? acc_bit : 0);
      out.accepting[bs] = automaton.accepting[q];
      // The automaton reads the current state's label; the bar action picks
      // which successor to take when there is a choice.
      const auto& succ = automaton.next[q][shape.labels[s]];
      for (int a = 0; a < A; ++a)
        for (int k = 0; k < K; ++k) {
          int q2 = succ[std::min<std::size_t>(k, succ.size() - 1)];
          int ba = a * K + k;
          for (int ia = 0; ia < A; ++ia)
            for (int t = 0; t < n; ++t) rd.q2[bs][ba][ia][t * Q + q2] = 1.0;
        }
    }
  rd.spec_out = LtlSpec{LtlFormula::always(LtlFormula::eventually(LtlFormula::atom(
                            static_cast<int>(rd.bar_propositions.size()) - 1))),
                        std::nullopt, rd.bar_propositions};
  assert_constructed_valid(rd, shape);
  return out;
}

ReductionDescriptor lambda_sink_reduction(const MdpShape& product_shape,
                                          const std::vector<char>& accepting,
                                          double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0))
    throw std::invalid_argument("lambda must lie strictly inside (0,1)");
  if (static_cast<int>(accepting.size()) != product_shape.state_count)
    throw std::invalid_argument("accepting set size mismatch");
  const int n = product_shape.state_count;
  const int A = product_shape.action_count;

  std::vector<int> sink_of(n, -1);
  int bar = n;
  for (int s = 0; s < n; ++s)
    if (accepting[s]) sink_of[s] = bar++;

  ReductionDescriptor rd = identity_skeleton(product_shape, bar, A);
  rd.bar_action_names = product_shape.action_names;
  rd.bar_initial = product_shape.initial;
  rd.bar_propositions.push_back(fresh_prop_name(product_shape.propositions, "sink"));
  const std::uint64_t sink_bit = std::uint64_t{1}
                                 << (rd.bar_propositions.size() - 1);
  std::vector<int> same_action(A);
  for (int a = 0; a < A; ++a) same_action[a] = a;
  rd.alpha.assign(bar, point_mass_alpha(A, A, same_action));

  for (int s = 0; s < n; ++s) {
    rd.beta[s] = s;
    rd.bar_labels[s] = product_shape.labels[s];
    double keep = accepting[s] ? lambda : 1.0;
    for (int ba = 0; ba < A; ++ba) {
      if (sink_of[s] >= 0) rd.q1[s][ba][sink_of[s]] = 1.0 - keep;
      for (int a = 0; a < A; ++a)
        for (int t = 0; t < n; ++t) rd.q2[s][ba][a][t] = keep;
    }
  }
  for (int s = 0; s < n; ++s) {
    if (sink_of[s] < 0) continue;
    int bs = sink_of[s];
    rd.beta[bs] = s;
    rd.bar_labels[bs] = sink_bit;
    for (int ba = 0; ba < A; ++ba) rd.q1[bs][ba][bs] = 1.0;
  }

  rd.spec_out = LimitAvgRmSpec{build_reach_arm(
      rd.bar_propositions, {rd.bar_propositions.back()})};
  assert_constructed_valid(rd, product_shape);
  return rd;
}

ReductionDescriptor two_discount_reduction(const MdpShape& product_shape,
                                           const std::vector<char>& accepting,
                                           double gamma1, double gamma2) {
  if (!(0.0 < gamma1 && gamma1 < gamma2 && gamma2 < 1.0))
    throw std::invalid_argument("need 0 < gamma1 < gamma2 < 1");
  if (static_cast<int>(accepting.size()) != product_shape.state_count)
    throw std::invalid_argument("accepting set size mismatch");
  const int n = product_shape.state_count;
  RewardTable reward(n, product_shape.action_count);
  std::vector<double> per_state(n);
  for (int s = 0; s < n; ++s) {
    per_state[s] = accepting[s] ? gamma1 : gamma2;
    if (accepting[s])
      for (int a = 0; a < product_shape.action_count; ++a)
        for (int t = 0; t < n; ++t) reward.at(s, a, t) = 1.0 - gamma1;
  }
  return multidiscount_reduction(product_shape, reward, Discount(per_state));
}

namespace {

// Deterministic bar-state tracking from observed inner states: for each
// (barS, observed inner s') there must be at most one q2-supported target.
std::vector<std::vector<int>> build_tracker(const ReductionDescriptor& rd) {
  std::vector<std::vector<int>> tracker(
      rd.bar_state_count, std::vector<int>(rd.inner_state_count, -1));
  for (int bs = 0; bs < rd.bar_state_count; ++bs) {
    for (int bt = 0; bt < rd.bar_state_count; ++bt) {
      bool supported = false;
      for (int ba = 0; ba < rd.bar_action_count && !supported; ++ba)
        for (int a = 0; a < rd.inner_action_count && !supported; ++a)
          supported = rd.q2[bs][ba][a][bt] > 0.0;
      if (!supported) continue;
      int t = rd.beta[bt];
      if (tracker[bs][t] != -1 && tracker[bs][t] != bt)
        throw std::invalid_argument(
            "policy mapping requires deterministic bar-state tracking; "
            "observation (bar " + std::to_string(bs) + ", inner " +
            std::to_string(t) + ") is ambiguous");
      tracker[bs][t] = bt;
    }
    // Total fallback for observations that cannot occur on runs.
    for (int t = 0; t < rd.inner_state_count; ++t) {
      if (tracker[bs][t] != -1) continue;
      int fallback = bs;
      for (int bt = 0; bt < rd.bar_state_count; ++bt)
        if (rd.beta[bt] == t) {
          fallback = bt;
          break;
        }
      tracker[bs][t] = fallback;
    }
  }
  return tracker;
}

std::vector<double> alpha_marginal(const ReductionDescriptor& rd, int bs,
                                   const std::vector<double>& bar_action_probs) {
  std::vector<double> out(rd.inner_action_count, 0.0);
  for (int ba = 0; ba < rd.bar_action_count; ++ba) {
    double p = bar_action_probs[ba];
    if (p == 0.0) continue;
    for (int a = 0; a < rd.inner_action_count; ++a)
      out[a] += p * rd.alpha[bs][ba][a];
  }
  return out;
}

}  // namespace

FiniteMemoryPolicy map_policy(const ReductionDescriptor& rd,
                              const PositionalPolicy& bar_policy) {
  check_shape_sizes(rd);
  bar_policy.check(rd.bar_state_count, rd.bar_action_count);
  auto tracker = build_tracker(rd);
  FiniteMemoryPolicy f;
  f.memory_count = rd.bar_state_count;
  f.initial_memory = rd.bar_initial;
  f.update = tracker;
  f.act.assign(rd.bar_state_count,
               std::vector<std::vector<double>>(rd.inner_state_count));
  for (int bs = 0; bs < rd.bar_state_count; ++bs) {
    auto marginal = alpha_marginal(rd, bs, bar_policy.probs[bs]);
    for (int s = 0; s < rd.inner_state_count; ++s) f.act[bs][s] = marginal;
  }
  return f;
}

FiniteMemoryPolicy map_policy(const ReductionDescriptor& rd,
                              const FiniteMemoryPolicy& bar_policy) {
  check_shape_sizes(rd);
  bar_policy.check(rd.bar_state_count, rd.bar_action_count);
  auto tracker = build_tracker(rd);
  const int M = bar_policy.memory_count;
  const int S = rd.bar_state_count;
  FiniteMemoryPolicy f;
  f.memory_count = M * S;  // (bar policy memory, tracked bar state)
  f.initial_memory = bar_policy.initial_memory * S + rd.bar_initial;
  f.update.assign(f.memory_count, std::vector<int>(rd.inner_state_count, 0));
  f.act.assign(f.memory_count,
               std::vector<std::vector<double>>(rd.inner_state_count));
  for (int m = 0; m < M; ++m)
    for (int bs = 0; bs < S; ++bs) {
      int mem = m * S + bs;
      auto marginal = alpha_marginal(rd, bs, bar_policy.act[m][bs]);
      for (int s = 0; s < rd.inner_state_count; ++s) {
        int bt = tracker[bs][s];
        f.update[mem][s] = bar_policy.update[m][bt] * S + bt;
        f.act[mem][s] = marginal;
      }
    }
  return f;
}

namespace {

PositionalPolicy policy_from_index(long index, int states, int actions) {
  std::vector<int> choice(states);
  for (int s = 0; s < states; ++s) {
    choice[s] = static_cast<int>(index % actions);
    index /= actions;
  }
  return PositionalPolicy::deterministic(choice, actions);
}

// The preservation check needs optimality thresholds for every machine
// class; fall back to the multichain gain solver where the public oracle
// declares limit-average control unsupported.
OptimalResult optimal_or_gain(const Mdp& mdp, const Specification& spec) {
  try {
    return optimal_value(mdp, spec);
  } catch (const UnsupportedSpecError&) {
    if (const auto* avg = std::get_if<LimitAvgRmSpec>(&spec))
      return limit_avg_optimal_by_gain(mdp, avg->machine);
    throw;
  }
}

struct PreservationCore {
  bool exhaustive = false;
  bool preserved = true;
  double bar_optimal = 0.0;
  long checked = 0;
  std::optional<PositionalPolicy> violating;
  double violating_value = 0.0;
  double mapped_value = 0.0;
};

PreservationCore preservation_core(
    const Mdp& bar_mdp, const ReductionDescriptor& rd, double orig_opt, long budget,
    const std::function<double(const FiniteMemoryPolicy&)>& orig_value) {
  PreservationCore core;
  double combos = std::pow(static_cast<double>(rd.bar_action_count),
                           static_cast<double>(rd.bar_state_count));
  core.exhaustive = combos <= static_cast<double>(budget);
  constexpr double kSlack = 1e-7;

  if (core.exhaustive) {
    const long total = static_cast<long>(combos);
    std::vector<double> values(total);
    core.bar_optimal = -std::numeric_limits<double>::infinity();
    for (long i = 0; i < total; ++i) {
      auto pol = policy_from_index(i, rd.bar_state_count, rd.bar_action_count);
      values[i] = spec_value(bar_mdp, rd.spec_out, pol);
      core.bar_optimal = std::max(core.bar_optimal, values[i]);
    }
    core.checked = total;
    core.mapped_value = orig_opt;
    for (long i = 0; i < total; ++i) {
      if (values[i] < core.bar_optimal - kSlack) continue;
      auto pol = policy_from_index(i, rd.bar_state_count, rd.bar_action_count);
      double v = orig_value(map_policy(rd, pol));
      core.mapped_value = std::min(core.mapped_value, v);
      if (v < orig_opt - kSlack) {
        core.preserved = false;
        core.violating = pol;
        core.violating_value = v;
        return core;
      }
    }
  } else {
    auto opt = optimal_or_gain(bar_mdp, rd.spec_out);
    core.bar_optimal = opt.value;
    core.checked = 1;
    double v = orig_value(map_policy(rd, opt.witness));
    core.mapped_value = v;
    if (v < orig_opt - kSlack) {
      core.preserved = false;
      core.violating_value = v;
    }
  }
  return core;
}

}  // namespace

PreservationReport check_optimality_preservation(const Mdp& mdp,
                                                 const Specification& spec,
                                                 const ReductionDescriptor& rd,
                                                 long budget) {
  auto violations = validate_reduction(rd, shape_of(mdp));
  if (!violations.empty())
    throw std::invalid_argument("invalid descriptor: " + violations.front().to_string());
  Mdp bar_mdp = induced_transitions(rd, mdp);
  double orig_opt = optimal_or_gain(mdp, spec).value;
  auto core = preservation_core(bar_mdp, rd, orig_opt, budget,
                                [&](const FiniteMemoryPolicy& f) {
                                  return spec_value(mdp, spec, f);
                                });
  PreservationReport report;
  report.exhaustive = core.exhaustive;
  report.preserved = core.preserved;
  report.bar_optimal = core.bar_optimal;
  report.orig_optimal = orig_opt;
  report.policies_checked = core.checked;
  report.violating_bar_policy = core.violating;
  report.violating_orig_value = core.violating_value;
  return report;
}

namespace {

double buchi_value_of(const Mdp& product, const std::vector<char>& accepting,
                      const FiniteMemoryPolicy& policy) {
  auto folded = fold_policy(product, policy);
  std::vector<char> lifted(folded.mdp.state_count, 0);
  for (int i = 0; i < folded.mdp.state_count; ++i)
    lifted[i] = accepting[folded.base_state[i]];
  return chain_buchi_prob(induced_chain(folded.mdp, folded.policy), lifted);
}

std::vector<SweepPoint> sweep_impl(
    const Mdp& product, const std::vector<char>& accepting, long budget,
    const std::vector<std::pair<double, double>>& params,
    const std::function<ReductionDescriptor(double, double)>& build) {
  double orig_opt = max_buchi_prob(product, accepting).value[product.initial];
  std::vector<SweepPoint> out;
  for (auto [p1, p2] : params) {
    ReductionDescriptor rd = build(p1, p2);
    Mdp bar_mdp = induced_transitions(rd, product);
    auto core = preservation_core(bar_mdp, rd, orig_opt, budget,
                                  [&](const FiniteMemoryPolicy& f) {
                                    return buchi_value_of(product, accepting, f);
                                  });
    SweepPoint pt;
    pt.param = p1;
    pt.param2 = p2;
    pt.preserved = core.preserved;
    pt.bar_optimal = core.bar_optimal;
    pt.mapped_value = core.mapped_value;
    pt.orig_optimal = orig_opt;
    out.push_back(pt);
  }
  return out;
}

}  // namespace

std::vector<SweepPoint> lambda_sink_sweep(const Mdp& product,
                                          const std::vector<char>& accepting,
                                          std::span<const double> lambdas,
                                          long budget) {
  std::vector<std::pair<double, double>> params;
  for (double l : lambdas) params.emplace_back(l, 0.0);
  return sweep_impl(product, accepting, budget, params, [&](double l, double) {
    return lambda_sink_reduction(shape_of(product), accepting, l);
  });
}

std::vector<SweepPoint> two_discount_sweep(
    const Mdp& product, const std::vector<char>& accepting,
    std::span<const std::pair<double, double>> gammas, long budget) {
  std::vector<std::pair<double, double>> params(gammas.begin(), gammas.end());
  return sweep_impl(product, accepting, budget, params, [&](double g1, double g2) {
    return two_discount_reduction(shape_of(product), accepting, g1, g2);
  });
}

}  // namespace rltrans
