#include "rltrans/specs.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace rltrans {

namespace {

using Kind = LtlFormula::Kind;

void check_reward_bounds(double r, bool normalized) {
  if (!std::isfinite(r)) throw std::invalid_argument("reward is not finite");
  if (normalized && (r < 0.0 || r > 1.0))
    throw std::invalid_argument("normalized machine has reward outside [0,1]");
}

}  // namespace

void RewardMachine::check(int states, int actions) const {
  if (rm_state_count <= 0 || initial < 0 || initial >= rm_state_count)
    throw std::invalid_argument("reward machine initial state out of range");
  if (static_cast<int>(update.size()) != rm_state_count ||
      static_cast<int>(rewards.size()) != rm_state_count)
    throw std::invalid_argument("reward machine table size mismatch");
  for (const auto& row : update) {
    if (static_cast<int>(row.size()) != states)
      throw std::invalid_argument("reward machine update not total");
    for (int u : row)
      if (u < 0 || u >= rm_state_count)
        throw std::invalid_argument("reward machine update out of range");
  }
  for (const auto& table : rewards) {
    if (table.states() != states || table.actions() != actions)
      throw std::invalid_argument("reward machine reward table shape mismatch");
    for (int s = 0; s < states; ++s)
      for (int a = 0; a < actions; ++a)
        for (int t = 0; t < states; ++t)
          check_reward_bounds(table.at(s, a, t), normalized);
  }
}

void AbstractRewardMachine::check() const {
  if (prop_count < 0 || prop_count > kMaxMaterializedProps)
    throw std::invalid_argument("abstract reward machine proposition count unsupported");
  if (rm_state_count <= 0 || initial < 0 || initial >= rm_state_count)
    throw std::invalid_argument("abstract reward machine initial out of range");
  const int masks = mask_count();
  if (static_cast<int>(update.size()) != rm_state_count ||
      static_cast<int>(rewards.size()) != rm_state_count)
    throw std::invalid_argument("abstract reward machine table size mismatch");
  for (const auto& row : update) {
    if (static_cast<int>(row.size()) != masks)
      throw std::invalid_argument("abstract reward machine update not total");
    for (int u : row)
      if (u < 0 || u >= rm_state_count)
        throw std::invalid_argument("abstract reward machine update out of range");
  }
  for (const auto& row : rewards) {
    if (static_cast<int>(row.size()) != masks)
      throw std::invalid_argument("abstract reward machine rewards not total");
    for (double r : row) check_reward_bounds(r, normalized);
  }
}

RewardMachine to_reward_machine(const AbstractRewardMachine& arm, const MdpShape& shape) {
  arm.check();
  if (static_cast<int>(shape.propositions.size()) != arm.prop_count)
    throw std::invalid_argument("proposition space mismatch between ARM and MDP");
  RewardMachine rm;
  rm.rm_state_count = arm.rm_state_count;
  // Label-keyed machines process the whole label word, so the initial
  // state's label is read before the first transition.
  rm.initial = arm.next(arm.initial, shape.labels[shape.initial]);
  rm.normalized = arm.normalized;
  rm.update.assign(arm.rm_state_count, std::vector<int>(shape.state_count, 0));
  rm.rewards.assign(arm.rm_state_count,
                    RewardTable(shape.state_count, shape.action_count));
  // The reward of (s, a, s') is the ARM reward on the label of s'.
  for (int u = 0; u < arm.rm_state_count; ++u)
    for (int s = 0; s < shape.state_count; ++s) {
      rm.update[u][s] = arm.next(u, shape.labels[s]);
      for (int a = 0; a < shape.action_count; ++a)
        for (int t = 0; t < shape.state_count; ++t)
          rm.rewards[u].at(t, a, s) = arm.reward(u, shape.labels[s]);
    }
  return rm;
}

bool BuchiAutomaton::is_deterministic() const {
  for (const auto& per_state : next)
    for (const auto& succ : per_state)
      if (succ.size() != 1) return false;
  return true;
}

void BuchiAutomaton::check() const {
  if (prop_count < 0 || prop_count > kMaxMaterializedProps)
    throw std::invalid_argument("automaton proposition count unsupported");
  if (state_count <= 0 || initial < 0 || initial >= state_count)
    throw std::invalid_argument("automaton initial out of range");
  if (static_cast<int>(next.size()) != state_count ||
      static_cast<int>(accepting.size()) != state_count)
    throw std::invalid_argument("automaton table size mismatch");
  for (const auto& per_state : next) {
    if (static_cast<int>(per_state.size()) != mask_count())
      throw std::invalid_argument("automaton transitions not total over masks");
    for (const auto& succ : per_state) {
      if (succ.empty())
        throw std::invalid_argument("automaton has an empty successor set");
      for (int q : succ)
        if (q < 0 || q >= state_count)
          throw std::invalid_argument("automaton successor out of range");
    }
  }
}

namespace {

BuchiAutomaton two_state_dba(int prop_count, const std::vector<int>& from0,
                             const std::vector<int>& from1, std::vector<char> acc) {
  BuchiAutomaton dba;
  dba.state_count = 2;
  dba.initial = 0;
  dba.prop_count = prop_count;
  dba.next.resize(2);
  dba.next[0].reserve(from0.size());
  for (int q : from0) dba.next[0].push_back({q});
  for (int q : from1) dba.next[1].push_back({q});
  dba.accepting = std::move(acc);
  dba.check();
  return dba;
}

std::vector<int> per_mask(int prop_count, const LtlFormula& pred, int on_true, int on_false) {
  if (prop_count > kMaxMaterializedProps)
    throw std::invalid_argument("proposition space too large to materialize automaton");
  std::vector<int> out(1 << prop_count);
  for (std::uint64_t m = 0; m < out.size(); ++m)
    out[m] = pred.eval_on_mask(m) ? on_true : on_false;
  return out;
}

}  // namespace

BuchiAutomaton dba_eventually(int prop_count, const LtlFormula& pred) {
  return two_state_dba(prop_count, per_mask(prop_count, pred, 1, 0),
                       std::vector<int>(1 << prop_count, 1), {0, 1});
}

BuchiAutomaton dba_always(int prop_count, const LtlFormula& pred) {
  return two_state_dba(prop_count, per_mask(prop_count, pred, 0, 1),
                       std::vector<int>(1 << prop_count, 1), {1, 0});
}

BuchiAutomaton dba_infinitely_often(int prop_count, const LtlFormula& pred) {
  auto row = per_mask(prop_count, pred, 1, 0);
  return two_state_dba(prop_count, row, row, {0, 1});
}

std::optional<BuchiAutomaton> builtin_automaton(const LtlFormula& formula,
                                                int prop_count) {
  if (!formula.valid()) return std::nullopt;
  const auto& r = formula.root();
  auto prop = [](const LtlFormula::NodePtr& n) {
    return LtlFormula::from_node(n).is_propositional();
  };
  // F p  ==  true U p
  if (r->kind == Kind::Until && r->left->kind == Kind::True && prop(r->right))
    return dba_eventually(prop_count, LtlFormula::from_node(r->right));
  if (r->kind == Kind::Not && r->left->kind == Kind::Until &&
      r->left->left->kind == Kind::True) {
    const auto& inner = r->left->right;
    // GF p  ==  !(true U !(true U p))
    if (inner->kind == Kind::Not && inner->left->kind == Kind::Until &&
        inner->left->left->kind == Kind::True && prop(inner->left->right))
      return dba_infinitely_often(prop_count, LtlFormula::from_node(inner->left->right));
    // G q  ==  !(true U !q); the guarded predicate is !q.
    if (prop(inner))
      return dba_always(prop_count,
                        LtlFormula::negate(LtlFormula::from_node(inner)));
  }
  return std::nullopt;
}

namespace {

AbstractRewardMachine trigger_arm(int prop_count, std::uint64_t x_mask, bool reach) {
  if (prop_count > kMaxMaterializedProps)
    throw std::invalid_argument("proposition space too large to materialize ARM");
  AbstractRewardMachine arm;
  arm.rm_state_count = 2;
  arm.initial = 0;
  arm.prop_count = prop_count;
  arm.normalized = true;
  const int masks = arm.mask_count();
  arm.update.assign(2, std::vector<int>(masks, 1));
  arm.rewards.assign(2, std::vector<double>(masks, 0.0));
  for (int m = 0; m < masks; ++m) {
    bool trigger = reach ? ((m & x_mask) != 0) : ((m & x_mask) == 0);
    arm.update[0][m] = trigger ? 1 : 0;
    if (reach) {
      arm.rewards[0][m] = trigger ? 1.0 : 0.0;
      arm.rewards[1][m] = 1.0;
    } else {
      arm.rewards[0][m] = trigger ? 0.0 : 1.0;
      arm.rewards[1][m] = 0.0;
    }
  }
  return arm;
}

std::uint64_t mask_from_names(const std::vector<std::string>& propositions,
                              const std::vector<std::string>& names) {
  std::uint64_t mask = 0;
  for (const auto& name : names) {
    bool found = false;
    for (std::size_t i = 0; i < propositions.size(); ++i)
      if (propositions[i] == name) {
        mask |= std::uint64_t{1} << i;
        found = true;
      }
    if (!found) throw std::invalid_argument("unknown proposition: " + name);
  }
  return mask;
}

}  // namespace

AbstractRewardMachine build_reach_arm_mask(int prop_count, std::uint64_t x_mask) {
  if (x_mask == 0) throw std::invalid_argument("reach proposition set must be nonempty");
  return trigger_arm(prop_count, x_mask, true);
}

AbstractRewardMachine build_safe_arm_mask(int prop_count, std::uint64_t x_mask) {
  if (x_mask == 0) throw std::invalid_argument("safe proposition set must be nonempty");
  return trigger_arm(prop_count, x_mask, false);
}

AbstractRewardMachine build_reach_arm(const std::vector<std::string>& propositions,
                                      const std::vector<std::string>& X) {
  return build_reach_arm_mask(static_cast<int>(propositions.size()),
                              mask_from_names(propositions, X));
}

AbstractRewardMachine build_safe_arm(const std::vector<std::string>& propositions,
                                     const std::vector<std::string>& X) {
  return build_safe_arm_mask(static_cast<int>(propositions.size()),
                             mask_from_names(propositions, X));
}

double rm_return_discounted(const RewardMachine& rm, const Run& run,
                            const Discount& gamma) {
  double sum = 0.0, disc = 1.0;
  int u = rm.initial;
  int s = run.start;
  for (auto [a, s2] : run.steps) {
    sum += disc * rm.reward(u, s, a, s2);
    disc *= gamma.at(s);
    u = rm.next(u, s2);
    s = s2;
  }
  return sum;
}

double rm_return_discounted(const RewardMachine& rm, const LassoRun& lasso,
                            const Discount& gamma) {
  lasso.check();
  double sum = 0.0, disc = 1.0;
  int u = rm.initial;
  int s = lasso.prefix.start;
  for (auto [a, s2] : lasso.prefix.steps) {
    sum += disc * rm.reward(u, s, a, s2);
    disc *= gamma.at(s);
    u = rm.next(u, s2);
    s = s2;
  }
  // Walk the cycle until the (cycle position, machine state) pair repeats,
  // then sum the periodic tail in closed form.
  struct Visit {
    double disc, sum;
  };
  std::map<std::pair<int, int>, Visit> seen;
  const int cycle_len = lasso.cycle.length();
  int phase = 0;
  while (true) {
    auto key = std::make_pair(phase, u);
    auto it = seen.find(key);
    if (it != seen.end()) {
      double d1 = it->second.disc, s1 = it->second.sum;
      double block_ratio = disc / d1;  // < 1 since every step discounts
      double tail = (sum - s1) / d1 / (1.0 - block_ratio);
      return s1 + d1 * tail;
    }
    seen.emplace(key, Visit{disc, sum});
    auto [a, s2] = lasso.cycle.steps[phase];
    sum += disc * rm.reward(u, s, a, s2);
    disc *= gamma.at(s);
    u = rm.next(u, s2);
    s = s2;
    phase = (phase + 1) % cycle_len;
  }
}

double rm_return_average(const RewardMachine& rm, const Run& run, int t) {
  if (t <= 0) throw std::invalid_argument("t must be positive");
  if (t > run.length())
    throw std::invalid_argument("t exceeds run length");
  double sum = 0.0;
  int u = rm.initial;
  int s = run.start;
  for (int i = 0; i < t; ++i) {
    auto [a, s2] = run.steps[i];
    sum += rm.reward(u, s, a, s2);
    u = rm.next(u, s2);
    s = s2;
  }
  return sum / t;
}

namespace {

RewardMachine materialize_machine(const RewardMachineLike& machine, const MdpShape& shape) {
  if (std::holds_alternative<AbstractRewardMachine>(machine))
    return to_reward_machine(std::get<AbstractRewardMachine>(machine), shape);
  RewardMachine rm = std::get<RewardMachine>(machine);
  rm.check(shape.state_count, shape.action_count);
  return rm;
}

/// Chain over (folded state, machine state) pairs with per-chain-state
/// expected reward and discount; rewards are read through callbacks so no
/// dense product table is materialized (Theorem-3-style witnesses can have
/// very long generated cycles).
struct MachineChain {
  MarkovChain chain;  // index = folded_state * U + u
  std::vector<double> reward;
  std::vector<double> gamma;
};

MachineChain build_machine_chain(const Mdp& mdp, const FoldedPolicy& fold,
                                 const RewardMachineLike& machine,
                                 const Discount* gamma) {
  const RewardMachine* rm = std::get_if<RewardMachine>(&machine);
  const AbstractRewardMachine* arm = std::get_if<AbstractRewardMachine>(&machine);
  int U, u0;
  if (rm) {
    rm->check(mdp.state_count, mdp.action_count);
    U = rm->rm_state_count;
    u0 = rm->initial;
  } else {
    arm->check();
    if (arm->prop_count != static_cast<int>(mdp.propositions.size()))
      throw std::invalid_argument("ARM proposition space mismatch");
    U = arm->rm_state_count;
    // The initial state's label is part of the word the machine reads.
    u0 = arm->next(arm->initial, fold.mdp.labels[fold.mdp.initial]);
  }
  auto next_u = [&](int u, int folded_target) {
    return rm ? rm->next(u, fold.base_state[folded_target])
              : arm->next(u, fold.mdp.labels[folded_target]);
  };
  auto step_reward = [&](int u, int folded_src, int a, int folded_target) {
    return rm ? rm->reward(u, fold.base_state[folded_src], a,
                           fold.base_state[folded_target])
              : arm->reward(u, fold.mdp.labels[folded_target]);
  };

  const int F = fold.mdp.state_count;
  MachineChain out;
  out.chain.state_count = F * U;
  out.chain.initial = fold.mdp.initial * U + u0;
  out.chain.rows.resize(F * U);
  out.reward.assign(F * U, 0.0);
  out.gamma.assign(F * U, 0.0);
  std::vector<double> dense(F * U, 0.0);
  std::vector<int> touched;
  for (int i = 0; i < F; ++i)
    for (int u = 0; u < U; ++u) {
      int idx = i * U + u;
      if (gamma) out.gamma[idx] = gamma->at(fold.base_state[i]);
      for (int a = 0; a < fold.mdp.action_count; ++a) {
        double pa = fold.policy.probs[i][a];
        if (pa == 0.0) continue;
        for (const auto& t : fold.mdp.rows[i][a]) {
          int target = t.to * U + next_u(u, t.to);
          if (dense[target] == 0.0) touched.push_back(target);
          dense[target] += pa * t.prob;
          out.reward[idx] += pa * t.prob * step_reward(u, i, a, t.to);
        }
      }
      std::sort(touched.begin(), touched.end());
      for (int t : touched) {
        if (dense[t] > 0.0) out.chain.rows[idx].push_back({t, dense[t]});
        dense[t] = 0.0;
      }
      touched.clear();
    }
  return out;
}

}  // namespace

RmProduct build_rm_product(const Mdp& mdp, const RewardMachineLike& machine,
                           const Discount* gamma) {
  RewardMachine rm = materialize_machine(machine, shape_of(mdp));
  const int U = rm.rm_state_count;
  const int n = mdp.state_count;
  RmProduct out;
  out.rm_state_count = U;
  out.mdp.state_count = n * U;
  out.mdp.action_count = mdp.action_count;
  out.mdp.initial = mdp.initial * U + rm.initial;
  out.mdp.propositions = mdp.propositions;
  out.mdp.action_names = mdp.action_names;
  out.mdp.labels.resize(out.mdp.state_count);
  out.mdp.rows.assign(out.mdp.state_count,
                      std::vector<std::vector<Transition>>(mdp.action_count));
  out.base_state.resize(out.mdp.state_count);
  out.rm_state.resize(out.mdp.state_count);
  out.reward = RewardTable(out.mdp.state_count, mdp.action_count);

  for (int s = 0; s < n; ++s)
    for (int u = 0; u < U; ++u) {
      int idx = s * U + u;
      out.base_state[idx] = s;
      out.rm_state[idx] = u;
      out.mdp.labels[idx] = mdp.labels[s];
      for (int a = 0; a < mdp.action_count; ++a)
        for (const auto& t : mdp.rows[s][a]) {
          int u2 = rm.next(u, t.to);
          out.mdp.rows[idx][a].push_back({t.to * U + u2, t.prob});
        }
    }
  for (int idx = 0; idx < out.mdp.state_count; ++idx)
    for (int a = 0; a < mdp.action_count; ++a)
      for (int idx2 = 0; idx2 < out.mdp.state_count; ++idx2)
        out.reward.at(idx, a, idx2) =
            rm.reward(out.rm_state[idx], out.base_state[idx], a, out.base_state[idx2]);

  if (gamma) {
    std::vector<double> g(out.mdp.state_count);
    for (int idx = 0; idx < out.mdp.state_count; ++idx)
      g[idx] = gamma->at(out.base_state[idx]);
    out.gamma = Discount(g);
  }
  return out;
}

DbaProduct build_dba_product(const Mdp& mdp, const BuchiAutomaton& dba) {
  dba.check();
  if (!dba.is_deterministic())
    throw UnsupportedSpecError(
        "nondeterministic automaton: resolve choices into product actions first");
  if (static_cast<int>(mdp.propositions.size()) != dba.prop_count)
    throw std::invalid_argument("proposition space mismatch between automaton and MDP");
  const int Q = dba.state_count;
  const int n = mdp.state_count;
  DbaProduct out;
  out.aut_state_count = Q;
  out.mdp.state_count = n * Q;
  out.mdp.action_count = mdp.action_count;
  // The automaton component has already read the initial state's label.
  out.mdp.initial = mdp.initial * Q + dba.next[dba.initial][mdp.labels[mdp.initial]][0];
  out.mdp.propositions = mdp.propositions;
  out.mdp.action_names = mdp.action_names;
  out.mdp.labels.resize(out.mdp.state_count);
  out.mdp.rows.assign(out.mdp.state_count,
                      std::vector<std::vector<Transition>>(mdp.action_count));
  out.base_state.resize(out.mdp.state_count);
  out.aut_state.resize(out.mdp.state_count);
  out.accepting.assign(out.mdp.state_count, 0);
  for (int s = 0; s < n; ++s)
    for (int q = 0; q < Q; ++q) {
      int idx = s * Q + q;
      out.base_state[idx] = s;
      out.aut_state[idx] = q;
      out.mdp.labels[idx] = mdp.labels[s];
      out.accepting[idx] = dba.accepting[q];
      for (int a = 0; a < mdp.action_count; ++a)
        for (const auto& t : mdp.rows[s][a]) {
          int q2 = dba.next[q][mdp.labels[t.to]][0];
          out.mdp.rows[idx][a].push_back({t.to * Q + q2, t.prob});
        }
    }
  return out;
}

PositionalPolicy lift_policy(const PositionalPolicy& policy,
                             const std::vector<int>& base_state) {
  PositionalPolicy out;
  out.probs.resize(base_state.size());
  for (std::size_t i = 0; i < base_state.size(); ++i)
    out.probs[i] = policy.probs[base_state[i]];
  return out;
}

std::vector<char> label_intersects(const Mdp& mdp, std::uint64_t mask) {
  std::vector<char> out(mdp.state_count, 0);
  for (int s = 0; s < mdp.state_count; ++s) out[s] = (mdp.labels[s] & mask) != 0;
  return out;
}

std::vector<char> label_subset_of(const Mdp& mdp, std::uint64_t mask) {
  std::vector<char> out(mdp.state_count, 0);
  for (int s = 0; s < mdp.state_count; ++s) out[s] = (mdp.labels[s] & ~mask) == 0;
  return out;
}

std::uint64_t resolve_props(const Mdp& mdp, const std::vector<std::string>& props) {
  std::uint64_t mask = 0;
  for (const auto& p : props) mask |= mdp.prop_mask(p);
  return mask;
}

namespace {

BuchiAutomaton automaton_for(const LtlSpec& spec, const Mdp& mdp) {
  if (spec.automaton) {
    spec.automaton->check();
    if (!spec.automaton->is_deterministic())
      throw UnsupportedSpecError(
          "nondeterministic automaton attached; evaluation requires determinism");
    if (spec.automaton->prop_count != static_cast<int>(mdp.propositions.size()))
      throw std::invalid_argument("automaton proposition space mismatch");
    return *spec.automaton;
  }
  auto builtin = builtin_automaton(spec.formula,
                                   static_cast<int>(mdp.propositions.size()));
  if (!builtin)
    throw UnsupportedSpecError(
        "LTL formula is not a built-in form and has no attached automaton");
  return *builtin;
}

// Recognizes the two trigger-ARM shapes with absorbing second state. For
// these, limit-average value reduces to a reachability or safety
// probability, which the state-set oracles solve exactly.
struct ArmClass {
  bool reach = true;
  std::vector<char> trigger;  // per mask
};

std::optional<ArmClass> classify_trigger_arm(const AbstractRewardMachine& arm) {
  if (arm.rm_state_count != 2) return std::nullopt;
  const int u0 = arm.initial;
  const int u1 = 1 - u0;
  const int masks = arm.mask_count();
  ArmClass cls;
  cls.trigger.assign(masks, 0);
  for (int m = 0; m < masks; ++m) {
    if (arm.update[u1][m] != u1) return std::nullopt;
    int to = arm.update[u0][m];
    if (to != u0 && to != u1) return std::nullopt;
    cls.trigger[m] = (to == u1);
  }
  auto matches = [&](bool reach) {
    for (int m = 0; m < masks; ++m) {
      double r0 = arm.rewards[u0][m];
      double r1 = arm.rewards[u1][m];
      double want0 = cls.trigger[m] ? (reach ? 1.0 : 0.0) : (reach ? 0.0 : 1.0);
      double want1 = reach ? 1.0 : 0.0;
      if (r0 != want0 || r1 != want1) return false;
    }
    return true;
  };
  if (matches(true)) {
    cls.reach = true;
    return cls;
  }
  if (matches(false)) {
    cls.reach = false;
    return cls;
  }
  return std::nullopt;
}

}  // namespace

double spec_value(const Mdp& mdp, const Specification& spec,
                  const FiniteMemoryPolicy& policy) {
  auto violations = validate_mdp(mdp);
  if (!violations.empty())
    throw std::invalid_argument("invalid MDP: " + violations.front().to_string());
  policy.check(mdp.state_count, mdp.action_count);
  FoldedPolicy fold = fold_policy(mdp, policy);

  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, DiscountedRmSpec>) {
          s.gamma.check(mdp.state_count);
          auto mc = build_machine_chain(mdp, fold, s.machine, &s.gamma);
          return chain_discounted_value(mc.chain, mc.reward,
                                        mc.gamma)[mc.chain.initial];
        } else if constexpr (std::is_same_v<T, LimitAvgRmSpec>) {
          auto mc = build_machine_chain(mdp, fold, s.machine, nullptr);
          return chain_gains(mc.chain, mc.reward)[mc.chain.initial];
        } else if constexpr (std::is_same_v<T, ReachSpec>) {
          auto target = label_intersects(fold.mdp, resolve_props(mdp, s.props));
          auto chain = induced_chain(fold.mdp, fold.policy);
          return chain_reach_prob(chain, target)[chain.initial];
        } else if constexpr (std::is_same_v<T, SafeSpec>) {
          auto safe = label_intersects(fold.mdp, resolve_props(mdp, s.props));
          std::vector<char> unsafe(safe.size());
          for (std::size_t i = 0; i < safe.size(); ++i) unsafe[i] = !safe[i];
          auto chain = induced_chain(fold.mdp, fold.policy);
          double fail = chain_reach_prob(chain, unsafe)[chain.initial];
          return 1.0 - fail;
        } else {
          static_assert(std::is_same_v<T, LtlSpec>);
          auto dba = automaton_for(s, mdp);
          auto product = build_dba_product(fold.mdp, dba);
          auto pol = lift_policy(fold.policy, product.base_state);
          auto chain = induced_chain(product.mdp, pol);
          return chain_buchi_prob(chain, product.accepting);
        }
      },
      spec);
}

double spec_value(const Mdp& mdp, const Specification& spec,
                  const PositionalPolicy& policy) {
  return spec_value(mdp, spec,
                    FiniteMemoryPolicy::from_positional(policy, mdp.state_count));
}

namespace {

FiniteMemoryPolicy rm_tracking_witness(const Mdp& mdp, const RewardMachineLike& machine,
                                       const PositionalPolicy& product_policy, int U) {
  RewardMachine rm = materialize_machine(machine, shape_of(mdp));
  FiniteMemoryPolicy w;
  w.memory_count = U;
  w.initial_memory = rm.initial;
  w.update.assign(U, std::vector<int>(mdp.state_count, 0));
  w.act.assign(U, std::vector<std::vector<double>>(mdp.state_count));
  for (int u = 0; u < U; ++u)
    for (int s = 0; s < mdp.state_count; ++s) {
      w.update[u][s] = rm.next(u, s);
      w.act[u][s] = product_policy.probs[s * U + u];
    }
  return w;
}

FiniteMemoryPolicy dba_tracking_witness(const Mdp& mdp, const BuchiAutomaton& dba,
                                        const std::vector<std::vector<double>>& product_act,
                                        int Q) {
  FiniteMemoryPolicy w;
  w.memory_count = Q;
  w.initial_memory = dba.next[dba.initial][mdp.labels[mdp.initial]][0];
  w.update.assign(Q, std::vector<int>(mdp.state_count, 0));
  w.act.assign(Q, std::vector<std::vector<double>>(mdp.state_count));
  for (int q = 0; q < Q; ++q)
    for (int s = 0; s < mdp.state_count; ++s) {
      w.update[q][s] = dba.next[q][mdp.labels[s]][0];
      w.act[q][s] = product_act[s * Q + q];
    }
  return w;
}

}  // namespace

OptimalResult limit_avg_optimal_by_gain(const Mdp& mdp, const RewardMachineLike& machine) {
  auto product = build_rm_product(mdp, machine, nullptr);
  auto vp = max_gain(product.mdp, product.reward);
  OptimalResult out;
  out.value = vp.value[product.mdp.initial];
  out.witness = rm_tracking_witness(mdp, machine, vp.policy, product.rm_state_count);
  return out;
}

OptimalResult optimal_value(const Mdp& mdp, const Specification& spec) {
  auto violations = validate_mdp(mdp);
  if (!violations.empty())
    throw std::invalid_argument("invalid MDP: " + violations.front().to_string());

  return std::visit(
      [&](const auto& s) -> OptimalResult {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, DiscountedRmSpec>) {
          s.gamma.check(mdp.state_count);
          auto product = build_rm_product(mdp, s.machine, &s.gamma);
          auto vp = value_iteration_discounted(product.mdp, product.reward,
                                               product.gamma, 1e-10);
          OptimalResult out;
          out.value = vp.value[product.mdp.initial];
          out.witness = rm_tracking_witness(mdp, s.machine, vp.policy,
                                            product.rm_state_count);
          return out;
        } else if constexpr (std::is_same_v<T, LimitAvgRmSpec>) {
          const auto* arm = std::get_if<AbstractRewardMachine>(&s.machine);
          if (!arm)
            throw UnsupportedSpecError(
                "limit-average optimal control is only supported for "
                "reachability/safety-shaped abstract reward machines");
          auto cls = classify_trigger_arm(*arm);
          if (!cls)
            throw UnsupportedSpecError(
                "limit-average optimal control is only supported for "
                "reachability/safety-shaped abstract reward machines");
          if (static_cast<int>(mdp.propositions.size()) != arm->prop_count)
            throw std::invalid_argument("ARM proposition space mismatch");
          std::vector<char> in_trigger(mdp.state_count, 0);
          for (int st = 0; st < mdp.state_count; ++st)
            in_trigger[st] = cls->trigger[mdp.labels[st]];
          OptimalResult out;
          if (cls->reach) {
            auto vp = max_reach_prob(mdp, in_trigger);
            out.value = vp.value[mdp.initial];
            out.witness = FiniteMemoryPolicy::from_positional(vp.policy, mdp.state_count);
          } else {
            std::vector<char> safe(mdp.state_count);
            for (int st = 0; st < mdp.state_count; ++st) safe[st] = !in_trigger[st];
            auto vp = max_safe_prob(mdp, safe);
            out.value = vp.value[mdp.initial];
            out.witness = FiniteMemoryPolicy::from_positional(vp.policy, mdp.state_count);
          }
          return out;
        } else if constexpr (std::is_same_v<T, ReachSpec>) {
          auto target = label_intersects(mdp, resolve_props(mdp, s.props));
          auto vp = max_reach_prob(mdp, target);
          return {vp.value[mdp.initial],
                  FiniteMemoryPolicy::from_positional(vp.policy, mdp.state_count)};
        } else if constexpr (std::is_same_v<T, SafeSpec>) {
          auto safe = label_intersects(mdp, resolve_props(mdp, s.props));
          auto vp = max_safe_prob(mdp, safe);
          return {vp.value[mdp.initial],
                  FiniteMemoryPolicy::from_positional(vp.policy, mdp.state_count)};
        } else {
          static_assert(std::is_same_v<T, LtlSpec>);
          auto dba = automaton_for(s, mdp);
          auto product = build_dba_product(mdp, dba);
          auto br = max_buchi_prob(product.mdp, product.accepting);
          OptimalResult out;
          out.value = br.value[product.mdp.initial];
          out.witness =
              dba_tracking_witness(mdp, dba, br.policy.act[0], product.aut_state_count);
          return out;
        }
      },
      spec);
}

bool is_eps_optimal(const Mdp& mdp, const Specification& spec,
                    const FiniteMemoryPolicy& policy, double eps) {
  double j = spec_value(mdp, spec, policy);
  double star = optimal_value(mdp, spec).value;
  return j >= star - eps - 1e-9;
}

bool is_eps_optimal(const Mdp& mdp, const Specification& spec,
                    const PositionalPolicy& policy, double eps) {
  return is_eps_optimal(mdp, spec,
                        FiniteMemoryPolicy::from_positional(policy, mdp.state_count),
                        eps);
}

}  // namespace rltrans
