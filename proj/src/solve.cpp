#include "rltrans/solve.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>

namespace rltrans {

namespace {

constexpr double kFixpointTol = 1e-12;
constexpr double kSnapTol = 1e-12;
// Chains larger than this are solved with a sparse factorization.
constexpr int kDenseLimit = 512;

void check_mdp_or_throw(const Mdp& mdp) {
  auto v = validate_mdp(mdp);
  if (!v.empty())
    throw std::invalid_argument("invalid MDP: " + v.front().to_string());
}

// Solves A x = b from triplet entries, dense or sparse by size; verifies
// the residual against the promised 1e-9 (scaled by the data magnitude).
std::vector<double> solve_system(int n,
                                 const std::vector<Eigen::Triplet<double>>& entries,
                                 const std::vector<double>& rhs, const char* what) {
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(rhs.data(), n);
  Eigen::VectorXd x;
  double resid;
  if (n <= kDenseLimit) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (const auto& t : entries) A(t.row(), t.col()) += t.value();
    x = A.partialPivLu().solve(b);
    resid = (A * x - b).lpNorm<Eigen::Infinity>();
  } else {
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(entries.begin(), entries.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success)
      throw NumericsError(std::string("sparse factorization failed in ") + what);
    x = lu.solve(b);
    resid = (A * x - b).lpNorm<Eigen::Infinity>();
  }
  double scale = std::max(1.0, b.lpNorm<Eigen::Infinity>());
  if (!(resid <= 1e-9 * scale) || !x.allFinite())
    throw NumericsError(std::string("singular or ill-conditioned system in ") + what);
  return {x.data(), x.data() + x.size()};
}

std::vector<char> backward_reachable(const std::vector<std::vector<int>>& pred,
                                     const std::vector<char>& seed) {
  std::vector<char> seen = seed;
  std::deque<int> queue;
  for (std::size_t s = 0; s < seed.size(); ++s)
    if (seed[s]) queue.push_back(static_cast<int>(s));
  while (!queue.empty()) {
    int s = queue.front();
    queue.pop_front();
    for (int p : pred[s])
      if (!seen[p]) {
        seen[p] = 1;
        queue.push_back(p);
      }
  }
  return seen;
}

// Tarjan strongly connected components (iterative).
std::vector<int> scc_ids(const std::vector<std::vector<int>>& adj, int* count_out) {
  const int n = static_cast<int>(adj.size());
  std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<char> on_stack(n, 0);
  std::vector<int> stack;
  int next_index = 0, comp_count = 0;

  std::vector<std::pair<int, std::size_t>> frames;
  for (int root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    frames.push_back({root, 0});
    while (!frames.empty()) {
      int v = frames.back().first;
      if (frames.back().second == 0) {
        index[v] = low[v] = next_index++;
        stack.push_back(v);
        on_stack[v] = 1;
      }
      bool descended = false;
      while (frames.back().second < adj[v].size()) {
        int w = adj[v][frames.back().second++];
        if (index[w] == -1) {
          frames.push_back({w, 0});
          descended = true;
          break;
        }
        if (on_stack[w]) low[v] = std::min(low[v], index[w]);
      }
      if (descended) continue;
      if (low[v] == index[v]) {
        while (true) {
          int w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp[w] = comp_count;
          if (w == v) break;
        }
        ++comp_count;
      }
      frames.pop_back();
      if (!frames.empty()) {
        int parent = frames.back().first;
        low[parent] = std::min(low[parent], low[v]);
      }
    }
  }
  if (count_out) *count_out = comp_count;
  return comp;
}

std::vector<std::vector<int>> chain_adjacency(const MarkovChain& chain) {
  std::vector<std::vector<int>> adj(chain.state_count);
  for (int s = 0; s < chain.state_count; ++s)
    for (const auto& [t, p] : chain.rows[s])
      if (p > 0.0) adj[s].push_back(t);
  return adj;
}

std::vector<std::vector<int>> chain_predecessors(const MarkovChain& chain) {
  std::vector<std::vector<int>> pred(chain.state_count);
  for (int s = 0; s < chain.state_count; ++s)
    for (const auto& [t, p] : chain.rows[s])
      if (p > 0.0) pred[t].push_back(s);
  return pred;
}

double snap01(double x) {
  if (std::fabs(x) <= kSnapTol) return 0.0;
  if (std::fabs(x - 1.0) <= kSnapTol) return 1.0;
  return std::clamp(x, 0.0, 1.0);
}

double q_value(const Mdp& mdp, const std::vector<double>& v, int s, int a) {
  double q = 0.0;
  for (const auto& t : mdp.rows[s][a]) q += t.prob * v[t.to];
  return q;
}

// Assigns actions that are value-consistent and strictly approach `base`
// (level-0 states), avoiding value-preserving actions that never progress,
// e.g. a self-loop whose Bellman backup ties the optimum.
void assign_progress_actions(const Mdp& mdp, const std::vector<double>& value,
                             const std::vector<char>& base,
                             const std::vector<char>& frozen,
                             std::vector<int>* actions) {
  const int n = mdp.state_count;
  std::vector<char> leveled(n, 0);
  for (int s = 0; s < n; ++s)
    if (base[s]) leveled[s] = 1;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int s = 0; s < n; ++s) {
      if (leveled[s] || frozen[s]) continue;
      for (int a = 0; a < mdp.action_count; ++a) {
        if (std::fabs(q_value(mdp, value, s, a) - value[s]) > 1e-9) continue;
        bool progress = false;
        for (const auto& t : mdp.rows[s][a])
          if (t.prob > 0.0 && leveled[t.to]) progress = true;
        if (progress) {
          (*actions)[s] = a;
          leveled[s] = 1;
          changed = true;
          break;
        }
      }
    }
  }
}

}  // namespace

MarkovChain induced_chain(const Mdp& mdp, const PositionalPolicy& policy) {
  policy.check(mdp.state_count, mdp.action_count);
  MarkovChain chain;
  chain.state_count = mdp.state_count;
  chain.initial = mdp.initial;
  chain.rows.resize(mdp.state_count);
  std::vector<double> dense(mdp.state_count, 0.0);
  std::vector<int> touched;
  for (int s = 0; s < mdp.state_count; ++s) {
    for (int a = 0; a < mdp.action_count; ++a) {
      double pa = policy.probs[s][a];
      if (pa == 0.0) continue;
      for (const auto& t : mdp.rows[s][a]) {
        if (dense[t.to] == 0.0) touched.push_back(t.to);
        dense[t.to] += pa * t.prob;
      }
    }
    std::sort(touched.begin(), touched.end());
    for (int t : touched) {
      if (dense[t] > 0.0) chain.rows[s].push_back({t, dense[t]});
      dense[t] = 0.0;
    }
    touched.clear();
  }
  return chain;
}

std::vector<double> expected_reward(const Mdp& mdp, const RewardTable& reward,
                                    const PositionalPolicy& policy) {
  std::vector<double> r(mdp.state_count, 0.0);
  for (int s = 0; s < mdp.state_count; ++s)
    for (int a = 0; a < mdp.action_count; ++a) {
      double pa = policy.probs[s][a];
      if (pa == 0.0) continue;
      for (const auto& t : mdp.rows[s][a]) r[s] += pa * t.prob * reward.at(s, a, t.to);
    }
  return r;
}

std::vector<double> chain_reach_prob(const MarkovChain& chain,
                                     const std::vector<char>& target) {
  const int n = chain.state_count;
  // Work on the chain with target states made absorbing: reaching is about
  // ever visiting, not about what happens afterwards.
  MarkovChain abs = chain;
  for (int s = 0; s < n; ++s)
    if (target[s]) abs.rows[s] = {{s, 1.0}};

  auto pred = chain_predecessors(abs);
  std::vector<char> can_reach = backward_reachable(pred, target);
  // States that cannot reach the target have probability exactly 0; states
  // that cannot reach those are absorbed almost surely.
  std::vector<char> zero(n, 0);
  for (int s = 0; s < n; ++s) zero[s] = !can_reach[s];
  std::vector<char> can_reach_zero = backward_reachable(pred, zero);

  std::vector<double> value(n, 0.0);
  std::vector<int> middle;
  std::vector<int> pos(n, -1);
  for (int s = 0; s < n; ++s) {
    if (zero[s]) {
      value[s] = 0.0;
    } else if (!can_reach_zero[s]) {
      value[s] = 1.0;
    } else {
      pos[s] = static_cast<int>(middle.size());
      middle.push_back(s);
    }
  }
  if (!middle.empty()) {
    const int m = static_cast<int>(middle.size());
    std::vector<Eigen::Triplet<double>> entries;
    std::vector<double> b(m, 0.0);
    for (int i = 0; i < m; ++i) {
      entries.emplace_back(i, i, 1.0);
      for (const auto& [t, p] : abs.rows[middle[i]]) {
        if (pos[t] >= 0)
          entries.emplace_back(i, pos[t], -p);
        else
          b[i] += p * value[t];
      }
    }
    auto x = solve_system(m, entries, b, "chain_reach_prob");
    for (int i = 0; i < m; ++i) value[middle[i]] = snap01(x[i]);
  }
  return value;
}

ChainDecomposition decompose_chain(const MarkovChain& chain) {
  auto adj = chain_adjacency(chain);
  int comp_count = 0;
  auto comp = scc_ids(adj, &comp_count);
  std::vector<char> closed(comp_count, 1);
  for (int s = 0; s < chain.state_count; ++s)
    for (int t : adj[s])
      if (comp[t] != comp[s]) closed[comp[s]] = 0;

  ChainDecomposition dec;
  dec.class_of.assign(chain.state_count, -1);
  std::vector<int> class_index(comp_count, -1);
  for (int s = 0; s < chain.state_count; ++s) {
    if (!closed[comp[s]]) continue;
    int& idx = class_index[comp[s]];
    if (idx == -1) {
      idx = static_cast<int>(dec.recurrent_classes.size());
      dec.recurrent_classes.emplace_back();
    }
    dec.recurrent_classes[idx].push_back(s);
    dec.class_of[s] = idx;
  }
  return dec;
}

std::vector<double> stationary_distribution(const MarkovChain& chain,
                                            const std::vector<int>& cls) {
  const int k = static_cast<int>(cls.size());
  if (k == 1) return {1.0};
  std::vector<int> pos(chain.state_count, -1);
  for (int i = 0; i < k; ++i) pos[cls[i]] = i;
  // Solve (P^T - I) x = 0 with x[0] pinned to 1, dropping the implied
  // balance equation of the pinned state; a normalization row would be
  // dense and ruin the sparse factorization on long cycles. Unknown j-1
  // stands for x[j], j >= 1.
  std::vector<Eigen::Triplet<double>> entries;
  std::vector<double> b(k - 1, 0.0);
  for (int i = 0; i < k; ++i) {
    for (const auto& [t, p] : chain.rows[cls[i]]) {
      if (pos[t] < 0) throw NumericsError("recurrent class is not closed");
      if (pos[t] == 0) continue;  // dropped equation
      if (i == 0)
        b[pos[t] - 1] -= p;
      else
        entries.emplace_back(pos[t] - 1, i - 1, p);
    }
    if (i > 0) entries.emplace_back(i - 1, i - 1, -1.0);
  }
  auto x = solve_system(k - 1, entries, b, "stationary_distribution");
  std::vector<double> out(k, 1.0);
  double total = 1.0;
  for (int i = 1; i < k; ++i) {
    out[i] = std::max(x[i - 1], 0.0);
    total += out[i];
  }
  for (double& xi : out) xi /= total;
  return out;
}

std::vector<std::vector<double>> absorption_probs(const MarkovChain& chain,
                                                  const ChainDecomposition& dec) {
  const int n = chain.state_count;
  const int c = static_cast<int>(dec.recurrent_classes.size());
  std::vector<std::vector<double>> out(n, std::vector<double>(c, 0.0));
  std::vector<int> transient;
  std::vector<int> pos(n, -1);
  for (int s = 0; s < n; ++s) {
    if (dec.class_of[s] >= 0) {
      out[s][dec.class_of[s]] = 1.0;
    } else {
      pos[s] = static_cast<int>(transient.size());
      transient.push_back(s);
    }
  }
  if (transient.empty()) return out;
  const int m = static_cast<int>(transient.size());
  std::vector<Eigen::Triplet<double>> entries;
  std::vector<std::vector<double>> rhs(c, std::vector<double>(m, 0.0));
  for (int i = 0; i < m; ++i) {
    entries.emplace_back(i, i, 1.0);
    for (const auto& [t, p] : chain.rows[transient[i]]) {
      if (pos[t] >= 0)
        entries.emplace_back(i, pos[t], -p);
      else
        rhs[dec.class_of[t]][i] += p;
    }
  }
  for (int j = 0; j < c; ++j) {
    auto x = solve_system(m, entries, rhs[j], "absorption_probs");
    for (int i = 0; i < m; ++i) out[transient[i]][j] = snap01(x[i]);
  }
  return out;
}

std::vector<double> chain_discounted_value(const MarkovChain& chain,
                                           const std::vector<double>& reward,
                                           const std::vector<double>& gamma) {
  const int n = chain.state_count;
  std::vector<Eigen::Triplet<double>> entries;
  for (int s = 0; s < n; ++s) {
    entries.emplace_back(s, s, 1.0);
    for (const auto& [t, p] : chain.rows[s]) entries.emplace_back(s, t, -gamma[s] * p);
  }
  return solve_system(n, entries, reward, "chain_discounted_value");
}

std::vector<double> chain_gains(const MarkovChain& chain,
                                const std::vector<double>& reward) {
  auto dec = decompose_chain(chain);
  std::vector<double> gain(dec.recurrent_classes.size(), 0.0);
  for (std::size_t c = 0; c < dec.recurrent_classes.size(); ++c) {
    auto x = stationary_distribution(chain, dec.recurrent_classes[c]);
    for (std::size_t i = 0; i < x.size(); ++i)
      gain[c] += x[i] * reward[dec.recurrent_classes[c][i]];
  }
  auto absorb = absorption_probs(chain, dec);
  std::vector<double> value(chain.state_count, 0.0);
  for (int s = 0; s < chain.state_count; ++s)
    for (std::size_t c = 0; c < gain.size(); ++c)
      value[s] += absorb[s][c] * gain[c];
  return value;
}

std::vector<double> discounted_value(const Mdp& mdp, const RewardTable& reward,
                                     const Discount& gamma,
                                     const PositionalPolicy& policy) {
  check_mdp_or_throw(mdp);
  gamma.check(mdp.state_count);
  auto chain = induced_chain(mdp, policy);
  auto r = expected_reward(mdp, reward, policy);
  std::vector<double> g(mdp.state_count);
  for (int s = 0; s < mdp.state_count; ++s) g[s] = gamma.at(s);
  return chain_discounted_value(chain, r, g);
}

ValuePolicy value_iteration_discounted(const Mdp& mdp, const RewardTable& reward,
                                       const Discount& gamma, double tol) {
  check_mdp_or_throw(mdp);
  gamma.check(mdp.state_count);
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  const int n = mdp.state_count;
  const double gmax = gamma.max_over(n);
  const double stop = tol * (1.0 - gmax) / (2.0 * gmax);

  std::vector<double> v(n, 0.0), next(n, 0.0);
  std::vector<std::vector<double>> r(n, std::vector<double>(mdp.action_count, 0.0));
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < mdp.action_count; ++a)
      for (const auto& t : mdp.rows[s][a]) r[s][a] += t.prob * reward.at(s, a, t.to);

  double resid = std::numeric_limits<double>::infinity();
  long iter = 0;
  const long max_iter = 5'000'000;
  while (resid > stop && iter++ < max_iter) {
    resid = 0.0;
    for (int s = 0; s < n; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < mdp.action_count; ++a) {
        double q = r[s][a] + gamma.at(s) * q_value(mdp, v, s, a);
        if (q > best) best = q;
      }
      next[s] = best;
      resid = std::max(resid, std::fabs(next[s] - v[s]));
    }
    std::swap(v, next);
  }
  if (resid > stop) throw NumericsError("value iteration failed to converge");

  std::vector<int> actions(n, 0);
  for (int s = 0; s < n; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < mdp.action_count; ++a) {
      double q = r[s][a] + gamma.at(s) * q_value(mdp, v, s, a);
      if (q > best) {
        best = q;
        actions[s] = a;
      }
    }
  }
  ValuePolicy out;
  out.policy = PositionalPolicy::deterministic(actions, mdp.action_count);
  // Exact evaluation of the greedy policy; at convergence this is the
  // optimal value up to the tol-based bound.
  out.value = discounted_value(mdp, reward, gamma, out.policy);
  return out;
}

ValuePolicy max_reach_prob(const Mdp& mdp, const std::vector<char>& target) {
  check_mdp_or_throw(mdp);
  const int n = mdp.state_count;
  std::vector<std::vector<int>> pred(n);
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < mdp.action_count; ++a)
      for (const auto& t : mdp.rows[s][a])
        if (t.prob > 0.0) pred[t.to].push_back(s);
  std::vector<char> can_reach = backward_reachable(pred, target);

  std::vector<double> v(n, 0.0);
  for (int s = 0; s < n; ++s)
    if (target[s]) v[s] = 1.0;

  double delta = 1.0;
  while (delta > kFixpointTol) {
    delta = 0.0;
    for (int s = 0; s < n; ++s) {
      if (target[s] || !can_reach[s]) continue;
      double best = 0.0;
      for (int a = 0; a < mdp.action_count; ++a)
        best = std::max(best, q_value(mdp, v, s, a));
      delta = std::max(delta, std::fabs(best - v[s]));
      v[s] = best;
    }
  }

  std::vector<int> actions(n, 0);
  std::vector<char> frozen(n, 0);
  for (int s = 0; s < n; ++s)
    if (!can_reach[s] && !target[s]) frozen[s] = 1;  // value 0, action irrelevant
  assign_progress_actions(mdp, v, target, frozen, &actions);

  ValuePolicy out;
  out.policy = PositionalPolicy::deterministic(actions, mdp.action_count);
  out.value = chain_reach_prob(induced_chain(mdp, out.policy), target);
  // The exact evaluation of the extracted policy must dominate the fixpoint
  // iterate, which approaches the optimum from below.
  for (int s = 0; s < n; ++s)
    if (out.value[s] < v[s] - 1e-8)
      throw NumericsError("reach policy extraction lost value");
  return out;
}

ValuePolicy max_safe_prob(const Mdp& mdp, const std::vector<char>& safe) {
  check_mdp_or_throw(mdp);
  const int n = mdp.state_count;

  // Greatest fixpoint of "some action keeps the run inside W surely".
  std::vector<char> w = safe;
  std::vector<int> sure_action(n, -1);
  bool changed = true;
  while (changed) {
    changed = false;
    for (int s = 0; s < n; ++s) {
      if (!w[s]) continue;
      sure_action[s] = -1;
      for (int a = 0; a < mdp.action_count && sure_action[s] < 0; ++a) {
        bool stays = true;
        for (const auto& t : mdp.rows[s][a])
          if (t.prob > 0.0 && !w[t.to]) stays = false;
        if (stays) sure_action[s] = a;
      }
      if (sure_action[s] < 0) {
        w[s] = 0;
        changed = true;
      }
    }
  }

  // Quantitative part: maximize the probability of reaching W while staying
  // safe; unsafe states are absorbing failures.
  std::vector<double> v(n, 0.0);
  for (int s = 0; s < n; ++s)
    if (w[s]) v[s] = 1.0;
  std::vector<std::vector<int>> pred(n);
  for (int s = 0; s < n; ++s) {
    if (!safe[s] || w[s]) continue;
    for (int a = 0; a < mdp.action_count; ++a)
      for (const auto& t : mdp.rows[s][a])
        if (t.prob > 0.0 && safe[t.to]) pred[t.to].push_back(s);
  }
  std::vector<char> can_reach_w = backward_reachable(pred, w);

  double delta = 1.0;
  while (delta > kFixpointTol) {
    delta = 0.0;
    for (int s = 0; s < n; ++s) {
      if (!safe[s] || w[s] || !can_reach_w[s]) continue;
      double best = 0.0;
      for (int a = 0; a < mdp.action_count; ++a) {
        double q = 0.0;
        for (const auto& t : mdp.rows[s][a])
          if (safe[t.to]) q += t.prob * v[t.to];
        best = std::max(best, q);
      }
      delta = std::max(delta, std::fabs(best - v[s]));
      v[s] = best;
    }
  }

  std::vector<int> actions(n, 0);
  std::vector<char> frozen(n, 0);
  for (int s = 0; s < n; ++s) {
    if (w[s]) {
      actions[s] = sure_action[s];
      frozen[s] = 1;
    } else if (!safe[s] || !can_reach_w[s]) {
      frozen[s] = 1;  // value 0
    }
  }
  assign_progress_actions(mdp, v, w, frozen, &actions);

  ValuePolicy out;
  out.policy = PositionalPolicy::deterministic(actions, mdp.action_count);
  std::vector<char> unsafe(n, 0);
  for (int s = 0; s < n; ++s) unsafe[s] = !safe[s];
  auto fail = chain_reach_prob(induced_chain(mdp, out.policy), unsafe);
  out.value.resize(n);
  for (int s = 0; s < n; ++s) out.value[s] = snap01(1.0 - fail[s]);
  for (int s = 0; s < n; ++s)
    if (out.value[s] < v[s] - 1e-8)
      throw NumericsError("safety policy extraction lost value");
  return out;
}

std::vector<double> limit_avg_values(const Mdp& mdp, const RewardTable& reward,
                                     const PositionalPolicy& policy) {
  check_mdp_or_throw(mdp);
  return chain_gains(induced_chain(mdp, policy), expected_reward(mdp, reward, policy));
}

double limit_avg_value(const Mdp& mdp, const RewardTable& reward,
                       const PositionalPolicy& policy) {
  return limit_avg_values(mdp, reward, policy)[mdp.initial];
}

std::vector<Mec> mec_decomposition(const Mdp& mdp) {
  check_mdp_or_throw(mdp);
  const int n = mdp.state_count;
  std::vector<char> active(n, 1);
  std::vector<std::vector<char>> allowed(n, std::vector<char>(mdp.action_count, 1));

  auto prune_dead_states = [&]() {
    bool any = true;
    while (any) {
      any = false;
      for (int s = 0; s < n; ++s) {
        if (!active[s]) continue;
        for (int a = 0; a < mdp.action_count; ++a) {
          if (!allowed[s][a]) continue;
          for (const auto& t : mdp.rows[s][a])
            if (t.prob > 0.0 && !active[t.to]) {
              allowed[s][a] = 0;
              break;
            }
        }
        bool has_action = false;
        for (int a = 0; a < mdp.action_count; ++a) has_action |= (allowed[s][a] != 0);
        if (!has_action) {
          active[s] = 0;
          any = true;
        }
      }
    }
  };

  bool changed = true;
  std::vector<int> comp;
  while (changed) {
    changed = false;
    prune_dead_states();
    std::vector<std::vector<int>> adj(n);
    for (int s = 0; s < n; ++s) {
      if (!active[s]) continue;
      for (int a = 0; a < mdp.action_count; ++a) {
        if (!allowed[s][a]) continue;
        for (const auto& t : mdp.rows[s][a])
          if (t.prob > 0.0) adj[s].push_back(t.to);
      }
    }
    comp = scc_ids(adj, nullptr);
    for (int s = 0; s < n; ++s) {
      if (!active[s]) continue;
      for (int a = 0; a < mdp.action_count; ++a) {
        if (!allowed[s][a]) continue;
        for (const auto& t : mdp.rows[s][a])
          if (t.prob > 0.0 && comp[t.to] != comp[s]) {
            allowed[s][a] = 0;
            changed = true;
            break;
          }
      }
    }
  }

  std::vector<Mec> out;
  std::vector<int> mec_of_comp(n, -1);
  for (int s = 0; s < n; ++s) {
    if (!active[s]) continue;
    int& idx = mec_of_comp[comp[s]];
    if (idx == -1) {
      idx = static_cast<int>(out.size());
      out.emplace_back();
    }
    out[idx].states.push_back(s);
    std::vector<int> acts;
    for (int a = 0; a < mdp.action_count; ++a)
      if (allowed[s][a]) acts.push_back(a);
    out[idx].allowed.push_back(std::move(acts));
  }
  return out;
}

ValuePolicy max_gain(const Mdp& mdp, const RewardTable& reward) {
  check_mdp_or_throw(mdp);
  const int n = mdp.state_count;
  std::vector<std::vector<double>> r(n, std::vector<double>(mdp.action_count, 0.0));
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < mdp.action_count; ++a)
      for (const auto& t : mdp.rows[s][a]) r[s][a] += t.prob * reward.at(s, a, t.to);

  auto mecs = mec_decomposition(mdp);
  std::vector<double> commit(n, -std::numeric_limits<double>::infinity());
  std::vector<int> commit_action(n, -1);

  for (const auto& mec : mecs) {
    // Optimal gain inside the component via relative value iteration on the
    // lazy transform (half self-loop mass keeps stationary distributions,
    // halves the gain, and makes the iteration aperiodic).
    const int k = static_cast<int>(mec.states.size());
    std::vector<int> pos(n, -1);
    for (int i = 0; i < k; ++i) pos[mec.states[i]] = i;
    std::vector<double> h(k, 0.0), next(k, 0.0);
    std::vector<int> best_action(k, 0);
    double gain_half = 0.0;
    double span = 1.0;
    long iter = 0;
    const long max_iter = 2'000'000;
    while (span > 1e-13 && iter++ < max_iter) {
      for (int i = 0; i < k; ++i) {
        int s = mec.states[i];
        double best = -std::numeric_limits<double>::infinity();
        for (int a : mec.allowed[i]) {
          double q = 0.5 * r[s][a];
          for (const auto& t : mdp.rows[s][a]) q += 0.5 * t.prob * h[pos[t.to]];
          q += 0.5 * h[i];
          if (q > best) {
            best = q;
            best_action[i] = a;
          }
        }
        next[i] = best;
      }
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (int i = 0; i < k; ++i) {
        lo = std::min(lo, next[i] - h[i]);
        hi = std::max(hi, next[i] - h[i]);
      }
      span = hi - lo;
      gain_half = 0.5 * (hi + lo);
      double offset = next[0];
      for (int i = 0; i < k; ++i) h[i] = next[i] - offset;
    }
    if (span > 1e-13) throw NumericsError("relative value iteration did not converge");
    for (int i = 0; i < k; ++i) {
      commit[mec.states[i]] = 2.0 * gain_half;
      commit_action[mec.states[i]] = best_action[i];
    }
  }

  // Optimal commitment: either commit to the current component's gain or
  // keep moving; monotone iteration from the commit values.
  std::vector<double> v(n);
  double r_min = 0.0;
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < mdp.action_count; ++a) r_min = std::min(r_min, r[s][a]);
  for (int s = 0; s < n; ++s)
    v[s] = commit_action[s] >= 0 ? commit[s] : r_min - 1.0;
  double delta = 1.0;
  long iter = 0;
  while (delta > kFixpointTol && iter++ < 2'000'000) {
    delta = 0.0;
    for (int s = 0; s < n; ++s) {
      double best = commit_action[s] >= 0 ? commit[s]
                                          : -std::numeric_limits<double>::infinity();
      for (int a = 0; a < mdp.action_count; ++a)
        best = std::max(best, q_value(mdp, v, s, a));
      delta = std::max(delta, std::fabs(best - v[s]));
      v[s] = best;
    }
  }
  if (delta > kFixpointTol)
    throw NumericsError("commitment iteration did not converge");

  // Assemble: states that commit play their in-component action; the rest
  // make value-consistent progress toward a committing state.
  std::vector<int> actions(n, 0);
  std::vector<char> committed(n, 0);
  for (int s = 0; s < n; ++s)
    if (commit_action[s] >= 0 && commit[s] >= v[s] - 1e-9) {
      committed[s] = 1;
      actions[s] = commit_action[s];
    }
  std::vector<char> frozen(n, 0);
  assign_progress_actions(mdp, v, committed, frozen, &actions);

  ValuePolicy out;
  out.policy = PositionalPolicy::deterministic(actions, mdp.action_count);
  out.value = chain_gains(induced_chain(mdp, out.policy),
                          expected_reward(mdp, reward, out.policy));
  for (int s = 0; s < n; ++s)
    if (out.value[s] < v[s] - 1e-8)
      throw NumericsError("gain policy extraction lost value");
  return out;
}

BuchiResult max_buchi_prob(const Mdp& mdp, const std::vector<char>& accepting) {
  check_mdp_or_throw(mdp);
  const int n = mdp.state_count;
  auto mecs = mec_decomposition(mdp);

  std::vector<char> in_accepting_mec(n, 0);
  std::vector<int> cycle_action(n, -1);
  for (const auto& mec : mecs) {
    bool acc = false;
    for (int s : mec.states) acc |= (accepting[s] != 0);
    if (!acc) continue;
    for (int s : mec.states) in_accepting_mec[s] = 1;
    // Inside the MEC, head toward the accepting states so they are visited
    // infinitely often; at accepting states any allowed action stays put.
    std::vector<char> leveled(n, 0);
    for (std::size_t i = 0; i < mec.states.size(); ++i) {
      int s = mec.states[i];
      if (accepting[s]) {
        leveled[s] = 1;
        cycle_action[s] = mec.allowed[i].front();
      }
    }
    bool progress = true;
    while (progress) {
      progress = false;
      for (std::size_t i = 0; i < mec.states.size(); ++i) {
        int s = mec.states[i];
        if (leveled[s]) continue;
        for (int a : mec.allowed[i]) {
          bool hits = false;
          for (const auto& t : mdp.rows[s][a])
            if (t.prob > 0.0 && leveled[t.to]) hits = true;
          if (hits) {
            cycle_action[s] = a;
            leveled[s] = 1;
            progress = true;
            break;
          }
        }
      }
    }
    for (int s : mec.states)
      if (cycle_action[s] < 0)
        throw NumericsError("accepting MEC is not strongly connected");
  }

  auto reach = max_reach_prob(mdp, in_accepting_mec);
  std::vector<int> actions(n, 0);
  for (int s = 0; s < n; ++s)
    actions[s] = in_accepting_mec[s] ? cycle_action[s] : reach.policy.action_at(s);

  BuchiResult out;
  out.value = reach.value;
  out.policy = FiniteMemoryPolicy::from_positional(
      PositionalPolicy::deterministic(actions, mdp.action_count), n);
  return out;
}

double chain_buchi_prob(const MarkovChain& chain, const std::vector<char>& accepting) {
  auto dec = decompose_chain(chain);
  std::vector<char> in_accepting_class(chain.state_count, 0);
  for (const auto& cls : dec.recurrent_classes) {
    bool acc = false;
    for (int s : cls) acc |= (accepting[s] != 0);
    if (acc)
      for (int s : cls) in_accepting_class[s] = 1;
  }
  return chain_reach_prob(chain, in_accepting_class)[chain.initial];
}

}  // namespace rltrans
