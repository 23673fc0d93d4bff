#include "rltrans/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rltrans {

double Mdp::prob(int s, int a, int to) const {
  double p = 0.0;
  for (const auto& t : rows[s][a])
    if (t.to == to) p += t.prob;
  return p;
}

std::uint64_t Mdp::prop_mask(const std::string& name) const {
  for (std::size_t i = 0; i < propositions.size(); ++i)
    if (propositions[i] == name) return std::uint64_t{1} << i;
  throw std::invalid_argument("unknown proposition: " + name);
}

MdpShape shape_of(const Mdp& mdp) {
  return MdpShape{mdp.state_count, mdp.action_count, mdp.initial,
                  mdp.propositions, mdp.action_names, mdp.labels};
}

double RewardTable::max_abs() const {
  double m = 0.0;
  for (double x : v_) m = std::max(m, std::fabs(x));
  return m;
}

double Discount::max_over(int state_count) const {
  if (!per_state_) return constant_;
  double m = 0.0;
  for (int s = 0; s < state_count; ++s) m = std::max(m, (*per_state_)[s]);
  return m;
}

double Discount::min_over(int state_count) const {
  if (!per_state_) return constant_;
  double m = 1.0;
  for (int s = 0; s < state_count; ++s) m = std::min(m, (*per_state_)[s]);
  return m;
}

void Discount::check(int state_count) const {
  if (per_state_ && static_cast<int>(per_state_->size()) < state_count)
    throw std::invalid_argument("discount vector shorter than state space");
  for (int s = 0; s < state_count; ++s) {
    double g = at(s);
    if (!(g > 0.0 && g < 1.0))
      throw std::invalid_argument("discount factor outside (0,1)");
  }
}

void Run::check_against(const Mdp& mdp) const {
  auto in_range = [&](int s) { return s >= 0 && s < mdp.state_count; };
  if (!in_range(start)) throw std::invalid_argument("run start out of range");
  for (auto [a, s] : steps) {
    if (a < 0 || a >= mdp.action_count)
      throw std::invalid_argument("run action out of range");
    if (!in_range(s)) throw std::invalid_argument("run state out of range");
  }
}

void LassoRun::check() const {
  if (cycle.steps.empty())
    throw std::invalid_argument("lasso cycle must be nonempty");
  if (prefix.last_state() != cycle.start)
    throw std::invalid_argument("lasso cycle must start at prefix end");
  if (cycle.last_state() != cycle.start)
    throw std::invalid_argument("lasso cycle must return to its start");
}

void LassoRun::check_against(const Mdp& mdp) const {
  check();
  prefix.check_against(mdp);
  cycle.check_against(mdp);
}

PositionalPolicy PositionalPolicy::uniform(int states, int actions) {
  PositionalPolicy p;
  p.probs.assign(states, std::vector<double>(actions, 1.0 / actions));
  return p;
}

PositionalPolicy PositionalPolicy::deterministic(std::vector<int> actions, int action_count) {
  PositionalPolicy p;
  p.probs.assign(actions.size(), std::vector<double>(action_count, 0.0));
  for (std::size_t s = 0; s < actions.size(); ++s) p.probs[s][actions[s]] = 1.0;
  return p;
}

PositionalPolicy PositionalPolicy::always(int action, int states, int actions) {
  return deterministic(std::vector<int>(states, action), actions);
}

bool PositionalPolicy::is_deterministic() const {
  for (const auto& row : probs)
    for (double p : row)
      if (p != 0.0 && p != 1.0) return false;
  return true;
}

int PositionalPolicy::action_at(int s) const {
  const auto& row = probs[s];
  int best = 0;
  for (int a = 1; a < static_cast<int>(row.size()); ++a)
    if (row[a] > row[best]) best = a;
  return best;
}

void PositionalPolicy::check(int states, int actions) const {
  if (static_cast<int>(probs.size()) != states)
    throw std::invalid_argument("policy state count mismatch");
  for (const auto& row : probs) {
    if (static_cast<int>(row.size()) != actions)
      throw std::invalid_argument("policy action count mismatch");
    double sum = 0.0;
    for (double p : row) {
      if (p < -kProbTol || p > 1.0 + kProbTol)
        throw std::invalid_argument("policy probability out of range");
      sum += p;
    }
    if (std::fabs(sum - 1.0) > kProbTol)
      throw std::invalid_argument("policy row does not sum to 1");
  }
}

FiniteMemoryPolicy FiniteMemoryPolicy::from_positional(const PositionalPolicy& p, int states) {
  FiniteMemoryPolicy f;
  f.memory_count = 1;
  f.initial_memory = 0;
  f.update.assign(1, std::vector<int>(states, 0));
  f.act.assign(1, p.probs);
  return f;
}

void FiniteMemoryPolicy::check(int states, int actions) const {
  if (static_cast<int>(update.size()) != memory_count ||
      static_cast<int>(act.size()) != memory_count)
    throw std::invalid_argument("finite-memory policy table size mismatch");
  if (initial_memory < 0 || initial_memory >= memory_count)
    throw std::invalid_argument("initial memory out of range");
  for (const auto& row : update) {
    if (static_cast<int>(row.size()) != states)
      throw std::invalid_argument("memory update table state mismatch");
    for (int m : row)
      if (m < 0 || m >= memory_count)
        throw std::invalid_argument("memory update out of range");
  }
  for (const auto& per_state : act) {
    if (static_cast<int>(per_state.size()) != states)
      throw std::invalid_argument("act table state mismatch");
    for (const auto& row : per_state) {
      if (static_cast<int>(row.size()) != actions)
        throw std::invalid_argument("act table action mismatch");
      double sum = 0.0;
      for (double p : row) sum += p;
      if (std::fabs(sum - 1.0) > kProbTol)
        throw std::invalid_argument("act row does not sum to 1");
    }
  }
}

std::string Violation::to_string() const {
  std::ostringstream os;
  os << check;
  if (state >= 0) os << " at state " << state;
  if (action >= 0) os << " action " << action;
  if (!detail.empty()) os << ": " << detail;
  return os.str();
}

std::vector<Violation> validate_mdp(const Mdp& mdp) {
  std::vector<Violation> out;
  if (mdp.state_count <= 0 || mdp.action_count <= 0)
    out.push_back({"empty-state-or-action-space", -1, -1, ""});
  if (mdp.initial < 0 || mdp.initial >= mdp.state_count)
    out.push_back({"initial-out-of-range", mdp.initial, -1, ""});
  if (mdp.propositions.size() > 64)
    out.push_back({"too-many-propositions", -1, -1,
                   std::to_string(mdp.propositions.size())});
  if (static_cast<int>(mdp.labels.size()) != mdp.state_count)
    out.push_back({"label-table-size", -1, -1, ""});
  std::uint64_t allowed =
      mdp.propositions.size() >= 64
          ? ~std::uint64_t{0}
          : ((std::uint64_t{1} << mdp.propositions.size()) - 1);
  for (std::size_t s = 0; s < mdp.labels.size(); ++s)
    if ((mdp.labels[s] & ~allowed) != 0)
      out.push_back({"label-uses-undeclared-proposition", static_cast<int>(s), -1, ""});
  if (static_cast<int>(mdp.rows.size()) != mdp.state_count) {
    out.push_back({"transition-table-size", -1, -1, ""});
    return out;
  }
  for (int s = 0; s < mdp.state_count; ++s) {
    if (static_cast<int>(mdp.rows[s].size()) != mdp.action_count) {
      out.push_back({"transition-row-count", s, -1, ""});
      continue;
    }
    for (int a = 0; a < mdp.action_count; ++a) {
      double sum = 0.0;
      for (const auto& t : mdp.rows[s][a]) {
        if (t.to < 0 || t.to >= mdp.state_count)
          out.push_back({"successor-out-of-range", s, a, std::to_string(t.to)});
        if (t.prob < 0.0 || t.prob > 1.0)
          out.push_back({"probability-out-of-range", s, a, std::to_string(t.prob)});
        sum += t.prob;
      }
      if (std::fabs(sum - 1.0) > kProbTol)
        out.push_back({"row-sum", s, a, std::to_string(sum)});
    }
  }
  return out;
}

double cylinder_prob(const Mdp& mdp, const FiniteMemoryPolicy& policy, const Run& run) {
  run.check_against(mdp);
  policy.check(mdp.state_count, mdp.action_count);
  if (run.start != mdp.initial) return 0.0;
  double p = 1.0;
  int s = run.start;
  int m = policy.initial_memory;
  for (auto [a, next] : run.steps) {
    p *= policy.act[m][s][a] * mdp.prob(s, a, next);
    if (p == 0.0) return 0.0;
    m = policy.update[m][next];
    s = next;
  }
  return p;
}

double cylinder_prob(const Mdp& mdp, const PositionalPolicy& policy, const Run& run) {
  return cylinder_prob(mdp, FiniteMemoryPolicy::from_positional(policy, mdp.state_count), run);
}

MdpSimulator::MdpSimulator(const Mdp& mdp, std::uint64_t seed)
    : mdp_(mdp), rng_(seed), state_(mdp.initial) {
  auto violations = validate_mdp(mdp_);
  if (!violations.empty())
    throw std::invalid_argument("invalid MDP behind simulator: " +
                                violations.front().to_string());
}

int MdpSimulator::step(int action) {
  if (action < 0 || action >= mdp_.action_count)
    throw std::out_of_range("action index out of range");
  const auto& row = mdp_.rows[state_][action];
  std::vector<double> weights(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) weights[i] = row[i].prob;
  state_ = row[rng_.sample(weights)].to;
  return state_;
}

FoldedPolicy fold_policy(const Mdp& mdp, const FiniteMemoryPolicy& policy) {
  policy.check(mdp.state_count, mdp.action_count);
  const int M = policy.memory_count;
  FoldedPolicy out;
  out.mdp.state_count = mdp.state_count * M;
  out.mdp.action_count = mdp.action_count;
  out.mdp.initial = mdp.initial * M + policy.initial_memory;
  out.mdp.propositions = mdp.propositions;
  out.mdp.action_names = mdp.action_names;
  out.mdp.labels.resize(out.mdp.state_count);
  out.mdp.rows.assign(out.mdp.state_count,
                      std::vector<std::vector<Transition>>(mdp.action_count));
  out.base_state.resize(out.mdp.state_count);
  out.memory_state.resize(out.mdp.state_count);
  out.policy.probs.resize(out.mdp.state_count);
  for (int s = 0; s < mdp.state_count; ++s) {
    for (int m = 0; m < M; ++m) {
      int idx = s * M + m;
      out.base_state[idx] = s;
      out.memory_state[idx] = m;
      out.mdp.labels[idx] = mdp.labels[s];
      out.policy.probs[idx] = policy.act[m][s];
      for (int a = 0; a < mdp.action_count; ++a) {
        for (const auto& t : mdp.rows[s][a]) {
          int m2 = policy.update[m][t.to];
          out.mdp.rows[idx][a].push_back({t.to * M + m2, t.prob});
        }
      }
    }
  }
  return out;
}

}  // namespace rltrans
