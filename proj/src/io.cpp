#include "rltrans/io.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace rltrans {

namespace {

std::vector<std::string> mask_to_names(std::uint64_t mask,
                                       const std::vector<std::string>& props) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < props.size(); ++i)
    if ((mask >> i) & 1) out.push_back(props[i]);
  return out;
}

std::uint64_t names_to_mask(const Json& names, const std::vector<std::string>& props) {
  std::uint64_t mask = 0;
  for (const auto& name : names) {
    auto it = std::find(props.begin(), props.end(), name.get<std::string>());
    if (it == props.end())
      throw std::invalid_argument("unknown proposition: " + name.get<std::string>());
    mask |= std::uint64_t{1} << (it - props.begin());
  }
  return mask;
}

int action_index(const Json& j, const std::vector<std::string>& names, int count) {
  if (j.is_number_integer()) {
    int a = j.get<int>();
    if (a < 0 || a >= count) throw std::invalid_argument("action index out of range");
    return a;
  }
  auto it = std::find(names.begin(), names.end(), j.get<std::string>());
  if (it == names.end())
    throw std::invalid_argument("unknown action: " + j.get<std::string>());
  return static_cast<int>(it - names.begin());
}

std::vector<std::string> default_action_names(int count) {
  std::vector<std::string> out;
  for (int a = 0; a < count; ++a) out.push_back("a" + std::to_string(a));
  return out;
}

}  // namespace

Json mdp_to_json(const Mdp& mdp) {
  Json j;
  j["propositions"] = mdp.propositions;
  j["states"] = mdp.state_count;
  j["initial"] = mdp.initial;
  j["actions"] = mdp.action_names.empty() ? default_action_names(mdp.action_count)
                                          : mdp.action_names;
  Json labels = Json::array();
  for (int s = 0; s < mdp.state_count; ++s)
    labels.push_back(mask_to_names(mdp.labels[s], mdp.propositions));
  j["labels"] = labels;
  Json transitions = Json::array();
  for (int s = 0; s < mdp.state_count; ++s)
    for (int a = 0; a < mdp.action_count; ++a)
      for (const auto& t : mdp.rows[s][a])
        transitions.push_back(
            {{"from", s}, {"action", a}, {"to", t.to}, {"prob", t.prob}});
  j["transitions"] = transitions;
  return j;
}

Mdp mdp_from_json(const Json& j) {
  std::vector<Violation> violations;
  Mdp mdp = mdp_from_json_lenient(j, &violations);
  if (!violations.empty())
    throw std::invalid_argument("invalid MDP file: " + violations.front().to_string());
  return mdp;
}

Mdp mdp_from_json_lenient(const Json& j, std::vector<Violation>* violations) {
  Mdp mdp;
  mdp.propositions = j.at("propositions").get<std::vector<std::string>>();
  mdp.state_count = j.at("states").get<int>();
  mdp.initial = j.at("initial").get<int>();
  mdp.action_names = j.at("actions").get<std::vector<std::string>>();
  mdp.action_count = static_cast<int>(mdp.action_names.size());
  mdp.labels.assign(mdp.state_count, 0);
  const auto& labels = j.at("labels");
  if (static_cast<int>(labels.size()) != mdp.state_count)
    throw std::invalid_argument("labels array must have one entry per state");
  for (int s = 0; s < mdp.state_count; ++s)
    mdp.labels[s] = names_to_mask(labels[s], mdp.propositions);
  mdp.rows.assign(mdp.state_count,
                  std::vector<std::vector<Transition>>(mdp.action_count));
  for (const auto& t : j.at("transitions")) {
    int s = t.at("from").get<int>();
    int a = action_index(t.at("action"), mdp.action_names, mdp.action_count);
    int to = t.at("to").get<int>();
    double p = t.at("prob").get<double>();
    if (s < 0 || s >= mdp.state_count)
      throw std::invalid_argument("transition source out of range");
    mdp.rows[s][a].push_back({to, p});
  }
  *violations = validate_mdp(mdp);
  return mdp;
}

namespace {

Json rm_to_json(const RewardMachine& rm) {
  Json j;
  j["kind"] = "rm";
  j["states"] = rm.rm_state_count;
  j["initial"] = rm.initial;
  j["normalized"] = rm.normalized;
  j["mdpStates"] = rm.update.empty() ? 0 : static_cast<int>(rm.update[0].size());
  j["mdpActions"] = rm.rewards.empty() ? 0 : rm.rewards[0].actions();
  Json update = Json::array();
  for (int u = 0; u < rm.rm_state_count; ++u)
    for (std::size_t s = 0; s < rm.update[u].size(); ++s)
      update.push_back(
          {{"from", u}, {"on", {{"state", static_cast<int>(s)}}}, {"to", rm.update[u][s]}});
  j["update"] = update;
  Json rewards = Json::array();
  for (int u = 0; u < rm.rm_state_count; ++u) {
    const auto& table = rm.rewards[u];
    for (int s = 0; s < table.states(); ++s)
      for (int a = 0; a < table.actions(); ++a)
        for (int t = 0; t < table.states(); ++t)
          if (table.at(s, a, t) != 0.0)
            rewards.push_back({{"at", u},
                               {"on", {{"from", s}, {"action", a}, {"to", t}}},
                               {"value", table.at(s, a, t)}});
  }
  j["rewards"] = rewards;
  return j;
}

Json arm_to_json(const AbstractRewardMachine& arm) {
  Json j;
  j["kind"] = "arm";
  j["states"] = arm.rm_state_count;
  j["initial"] = arm.initial;
  j["normalized"] = arm.normalized;
  std::vector<std::string> props;
  for (int i = 0; i < arm.prop_count; ++i) props.push_back("p" + std::to_string(i));
  j["propositions"] = props;
  Json update = Json::array();
  Json rewards = Json::array();
  for (int u = 0; u < arm.rm_state_count; ++u)
    for (int m = 0; m < arm.mask_count(); ++m) {
      update.push_back({{"from", u},
                        {"on", mask_to_names(static_cast<std::uint64_t>(m), props)},
                        {"to", arm.update[u][m]}});
      if (arm.rewards[u][m] != 0.0)
        rewards.push_back({{"at", u},
                           {"on", mask_to_names(static_cast<std::uint64_t>(m), props)},
                           {"value", arm.rewards[u][m]}});
    }
  j["update"] = update;
  j["rewards"] = rewards;
  return j;
}

}  // namespace

Json machine_to_json(const RewardMachineLike& machine) {
  if (std::holds_alternative<RewardMachine>(machine))
    return rm_to_json(std::get<RewardMachine>(machine));
  return arm_to_json(std::get<AbstractRewardMachine>(machine));
}

RewardMachineLike machine_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const int states = j.at("states").get<int>();
  const int initial = j.at("initial").get<int>();
  const bool normalized = j.value("normalized", false);
  if (kind == "rm") {
    RewardMachine rm;
    rm.rm_state_count = states;
    rm.initial = initial;
    rm.normalized = normalized;
    const int n = j.at("mdpStates").get<int>();
    const int a_count = j.at("mdpActions").get<int>();
    rm.update.assign(states, std::vector<int>(n, -1));
    rm.rewards.assign(states, RewardTable(n, a_count));
    for (const auto& e : j.at("update"))
      rm.update[e.at("from").get<int>()][e.at("on").at("state").get<int>()] =
          e.at("to").get<int>();
    for (int u = 0; u < states; ++u)
      for (int s = 0; s < n; ++s)
        if (rm.update[u][s] < 0)
          throw std::invalid_argument("reward machine update is not total");
    for (const auto& e : j.at("rewards")) {
      const auto& on = e.at("on");
      rm.rewards[e.at("at").get<int>()].at(on.at("from").get<int>(),
                                           on.at("action").get<int>(),
                                           on.at("to").get<int>()) =
          e.at("value").get<double>();
    }
    rm.check(n, a_count);
    return rm;
  }
  if (kind != "arm") throw std::invalid_argument("machine kind must be rm or arm");
  AbstractRewardMachine arm;
  arm.rm_state_count = states;
  arm.initial = initial;
  arm.normalized = normalized;
  auto props = j.at("propositions").get<std::vector<std::string>>();
  arm.prop_count = static_cast<int>(props.size());
  if (arm.prop_count > kMaxMaterializedProps)
    throw std::invalid_argument("too many propositions for a dense machine");
  arm.update.assign(states, std::vector<int>(arm.mask_count(), -1));
  arm.rewards.assign(states, std::vector<double>(arm.mask_count(), 0.0));
  for (const auto& e : j.at("update"))
    arm.update[e.at("from").get<int>()][names_to_mask(e.at("on"), props)] =
        e.at("to").get<int>();
  for (int u = 0; u < states; ++u)
    for (int m = 0; m < arm.mask_count(); ++m)
      if (arm.update[u][m] < 0)
        throw std::invalid_argument("abstract machine update is not total over masks");
  for (const auto& e : j.at("rewards"))
    arm.rewards[e.at("at").get<int>()][names_to_mask(e.at("on"), props)] =
        e.at("value").get<double>();
  arm.check();
  return arm;
}

Json buchi_to_json(const BuchiAutomaton& dba) {
  Json j;
  j["states"] = dba.state_count;
  j["initial"] = dba.initial;
  std::vector<std::string> props;
  for (int i = 0; i < dba.prop_count; ++i) props.push_back("p" + std::to_string(i));
  j["propositions"] = props;
  Json accepting = Json::array();
  for (int q = 0; q < dba.state_count; ++q)
    if (dba.accepting[q]) accepting.push_back(q);
  j["accepting"] = accepting;
  Json edges = Json::array();
  for (int q = 0; q < dba.state_count; ++q)
    for (int m = 0; m < dba.mask_count(); ++m)
      edges.push_back({{"from", q},
                       {"on", mask_to_names(static_cast<std::uint64_t>(m), props)},
                       {"to", dba.next[q][m]}});
  j["edges"] = edges;
  return j;
}

BuchiAutomaton buchi_from_json(const Json& j) {
  BuchiAutomaton dba;
  dba.state_count = j.at("states").get<int>();
  dba.initial = j.at("initial").get<int>();
  auto props = j.at("propositions").get<std::vector<std::string>>();
  dba.prop_count = static_cast<int>(props.size());
  if (dba.prop_count > kMaxMaterializedProps)
    throw std::invalid_argument("too many propositions for a dense automaton");
  dba.accepting.assign(dba.state_count, 0);
  for (const auto& q : j.at("accepting")) dba.accepting[q.get<int>()] = 1;
  dba.next.assign(dba.state_count,
                  std::vector<std::vector<int>>(dba.mask_count()));
  for (const auto& e : j.at("edges")) {
    auto& slot = dba.next[e.at("from").get<int>()][names_to_mask(e.at("on"), props)];
    for (const auto& t : e.at("to")) slot.push_back(t.get<int>());
    std::sort(slot.begin(), slot.end());
    slot.erase(std::unique(slot.begin(), slot.end()), slot.end());
  }
  dba.check();
  return dba;
}

Json spec_to_json(const Specification& spec) {
  return std::visit(
      [](const auto& s) -> Json {
        using T = std::decay_t<decltype(s)>;
        Json j;
        if constexpr (std::is_same_v<T, DiscountedRmSpec>) {
          j["type"] = "discounted-rm";
          j["machine"] = machine_to_json(s.machine);
          if (s.gamma.is_constant())
            j["gamma"] = s.gamma.constant();
          else
            j["gamma"] = *s.gamma.per_state();
        } else if constexpr (std::is_same_v<T, LimitAvgRmSpec>) {
          j["type"] = "limitavg-rm";
          j["machine"] = machine_to_json(s.machine);
        } else if constexpr (std::is_same_v<T, ReachSpec>) {
          j["type"] = "reach";
          j["props"] = s.props;
        } else if constexpr (std::is_same_v<T, SafeSpec>) {
          j["type"] = "safe";
          j["props"] = s.props;
        } else {
          j["type"] = "ltl";
          j["formula"] = s.formula.to_string(s.propositions);
          j["propositions"] = s.propositions;
          if (s.automaton) j["automaton"] = buchi_to_json(*s.automaton);
        }
        return j;
      },
      spec);
}

Specification spec_from_json(const Json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "discounted-rm") {
    DiscountedRmSpec s{machine_from_json(j.at("machine")), Discount(0.5)};
    const auto& g = j.at("gamma");
    if (g.is_array())
      s.gamma = Discount(g.get<std::vector<double>>());
    else
      s.gamma = Discount(g.get<double>());
    return s;
  }
  if (type == "limitavg-rm") return LimitAvgRmSpec{machine_from_json(j.at("machine"))};
  if (type == "reach") return ReachSpec{j.at("props").get<std::vector<std::string>>()};
  if (type == "safe") return SafeSpec{j.at("props").get<std::vector<std::string>>()};
  if (type == "ltl") {
    LtlSpec s;
    s.propositions = j.at("propositions").get<std::vector<std::string>>();
    s.formula = parse_ltl(j.at("formula").get<std::string>(), s.propositions);
    if (j.contains("automaton") && !j.at("automaton").is_null())
      s.automaton = buchi_from_json(j.at("automaton"));
    return s;
  }
  throw std::invalid_argument("unknown specification type: " + type);
}

Json descriptor_to_json(const ReductionDescriptor& rd) {
  Json j;
  j["barStates"] = rd.bar_state_count;
  j["barActions"] = rd.bar_action_count;
  j["barInitial"] = rd.bar_initial;
  j["propositions"] = rd.bar_propositions;
  j["innerStates"] = rd.inner_state_count;
  j["innerActions"] = rd.inner_action_count;
  j["innerInitial"] = rd.inner_initial;
  Json labels = Json::array();
  for (int s = 0; s < rd.bar_state_count; ++s)
    labels.push_back(mask_to_names(rd.bar_labels[s], rd.bar_propositions));
  j["labels"] = labels;
  j["beta"] = rd.beta;
  Json alpha = Json::array();
  Json q1 = Json::array();
  Json q2 = Json::array();
  for (int bs = 0; bs < rd.bar_state_count; ++bs)
    for (int ba = 0; ba < rd.bar_action_count; ++ba) {
      Json dist = Json::array();
      for (int a = 0; a < rd.inner_action_count; ++a)
        if (rd.alpha[bs][ba][a] != 0.0)
          dist.push_back({{"inner", a}, {"prob", rd.alpha[bs][ba][a]}});
      alpha.push_back({{"from", bs}, {"action", ba}, {"dist", dist}});
      for (int bt = 0; bt < rd.bar_state_count; ++bt)
        if (rd.q1[bs][ba][bt] != 0.0)
          q1.push_back(
              {{"from", bs}, {"action", ba}, {"to", bt}, {"prob", rd.q1[bs][ba][bt]}});
      for (int a = 0; a < rd.inner_action_count; ++a)
        for (int bt = 0; bt < rd.bar_state_count; ++bt)
          if (rd.q2[bs][ba][a][bt] != 0.0)
            q2.push_back({{"from", bs},
                          {"action", ba},
                          {"inner", a},
                          {"to", bt},
                          {"prob", rd.q2[bs][ba][a][bt]}});
    }
  j["alpha"] = alpha;
  j["q1"] = q1;
  j["q2"] = q2;
  j["spec"] = spec_to_json(rd.spec_out);
  return j;
}

ReductionDescriptor descriptor_from_json(const Json& j) {
  ReductionDescriptor rd;
  rd.bar_state_count = j.at("barStates").get<int>();
  rd.bar_action_count = j.at("barActions").get<int>();
  rd.bar_initial = j.at("barInitial").get<int>();
  rd.bar_propositions = j.at("propositions").get<std::vector<std::string>>();
  rd.inner_state_count = j.at("innerStates").get<int>();
  rd.inner_action_count = j.at("innerActions").get<int>();
  rd.inner_initial = j.at("innerInitial").get<int>();
  rd.beta = j.at("beta").get<std::vector<int>>();
  rd.bar_labels.assign(rd.bar_state_count, 0);
  const auto& labels = j.at("labels");
  for (int s = 0; s < rd.bar_state_count; ++s)
    rd.bar_labels[s] = names_to_mask(labels[s], rd.bar_propositions);
  rd.alpha.assign(rd.bar_state_count,
                  std::vector<std::vector<double>>(
                      rd.bar_action_count,
                      std::vector<double>(rd.inner_action_count, 0.0)));
  rd.q1.assign(rd.bar_state_count,
               std::vector<std::vector<double>>(
                   rd.bar_action_count, std::vector<double>(rd.bar_state_count, 0.0)));
  rd.q2.assign(rd.bar_state_count,
               std::vector<std::vector<std::vector<double>>>(
                   rd.bar_action_count,
                   std::vector<std::vector<double>>(
                       rd.inner_action_count,
                       std::vector<double>(rd.bar_state_count, 0.0))));
  for (const auto& e : j.at("alpha")) {
    int bs = e.at("from").get<int>();
    int ba = e.at("action").get<int>();
    for (const auto& d : e.at("dist"))
      rd.alpha[bs][ba][d.at("inner").get<int>()] = d.at("prob").get<double>();
  }
  for (const auto& e : j.at("q1"))
    rd.q1[e.at("from").get<int>()][e.at("action").get<int>()][e.at("to").get<int>()] =
        e.at("prob").get<double>();
  for (const auto& e : j.at("q2"))
    rd.q2[e.at("from").get<int>()][e.at("action").get<int>()][e.at("inner").get<int>()]
         [e.at("to").get<int>()] = e.at("prob").get<double>();
  rd.spec_out = spec_from_json(j.at("spec"));
  return rd;
}

Json policy_to_json(const FiniteMemoryPolicy& policy) {
  Json j;
  j["memory"] = policy.memory_count;
  j["initialMemory"] = policy.initial_memory;
  j["update"] = policy.update;
  j["act"] = policy.act;
  return j;
}

FiniteMemoryPolicy policy_from_json(const Json& j) {
  FiniteMemoryPolicy p;
  p.memory_count = j.at("memory").get<int>();
  p.initial_memory = j.at("initialMemory").get<int>();
  p.update = j.at("update").get<std::vector<std::vector<int>>>();
  p.act = j.at("act").get<std::vector<std::vector<std::vector<double>>>>();
  return p;
}

Json preservation_to_json(const PreservationReport& report,
                          const std::vector<Violation>& violations,
                          const std::vector<SweepPoint>& sweep) {
  Json j;
  j["valid"] = violations.empty();
  Json v = Json::array();
  for (const auto& violation : violations) v.push_back(violation.to_string());
  j["violations"] = v;
  if (violations.empty()) {
    j["preserved"] = report.preserved;
    j["exhaustive"] = report.exhaustive;
    j["barOptimal"] = report.bar_optimal;
    j["origOptimal"] = report.orig_optimal;
    j["policiesChecked"] = report.policies_checked;
    if (report.violating_bar_policy) {
      Json witness = Json::array();
      for (const auto& row : report.violating_bar_policy->probs) witness.push_back(row);
      j["witness"] = witness;
      j["witnessValueInOriginal"] = report.violating_orig_value;
    } else {
      j["witness"] = nullptr;
    }
  } else {
    j["preserved"] = nullptr;
    j["witness"] = nullptr;
  }
  Json sw = Json::array();
  for (const auto& point : sweep) {
    Json p;
    p["param"] = point.param;
    if (point.param2 != 0.0) p["param2"] = point.param2;
    p["preserved"] = point.preserved;
    p["barOptimal"] = point.bar_optimal;
    p["mappedValue"] = point.mapped_value;
    p["origOptimal"] = point.orig_optimal;
    sw.push_back(p);
  }
  j["sweep"] = sw;
  return j;
}

Json experiment_to_json(const ExperimentReport& report) {
  Json j;
  j["name"] = report.name;
  j["parameters"] = report.parameters;
  j["quantities"] = report.quantities;
  Json verdicts = Json::array();
  for (const auto& v : report.verdicts) {
    Json e;
    e["name"] = v.name;
    e["pass"] = v.pass;
    if (!v.detail.empty()) e["detail"] = v.detail;
    verdicts.push_back(e);
  }
  j["verdicts"] = verdicts;
  j["allPass"] = report.all_pass();
  j["seeds"] = report.seeds;
  j["notes"] = report.notes;
  Json rows = Json::array();
  for (const auto& row : report.rows) rows.push_back(row);
  j["rows"] = rows;
  return j;
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string experiment_to_csv(const ExperimentReport& report) {
  std::set<std::string> columns;
  for (const auto& row : report.rows)
    for (const auto& [k, v] : row) columns.insert(k);
  std::ostringstream os;
  bool first = true;
  for (const auto& c : columns) {
    if (!first) os << ',';
    os << c;
    first = false;
  }
  os << '\n';
  for (const auto& row : report.rows) {
    first = true;
    for (const auto& c : columns) {
      if (!first) os << ',';
      auto it = row.find(c);
      if (it != row.end()) os << format_double(it->second);
      first = false;
    }
    os << '\n';
  }
  return os.str();
}

std::string trace_to_csv(const std::vector<ConvergencePoint>& points) {
  std::ostringstream os;
  os << "iteration,policy-id,J,gap\n";
  for (std::size_t i = 0; i < points.size(); ++i)
    os << points[i].iteration << ',' << i << ',' << format_double(points[i].value)
       << ',' << format_double(points[i].gap) << '\n';
  return os.str();
}

Json trace_policies_to_json(const PolicyTrace& trace) {
  Json j = Json::array();
  for (std::size_t i = 0; i < trace.snapshots.size(); ++i) {
    Json e;
    e["policy-id"] = i;
    e["iteration"] = trace.snapshots[i].iteration;
    e["policy"] = policy_to_json(trace.snapshots[i].policy);
    j.push_back(e);
  }
  return j;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Json load_json(const std::string& path) { return Json::parse(read_text_file(path)); }

void save_json(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

Specification parse_spec_string(const std::string& text,
                                const std::vector<std::string>& propositions,
                                const std::string& automaton_path) {
  auto colon = text.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("spec must look like kind:argument");
  const std::string kind = text.substr(0, colon);
  const std::string arg = text.substr(colon + 1);
  auto split_names = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else if (!std::isspace(static_cast<unsigned char>(c))) {
        cur += c;
      }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
  };
  if (kind == "reach") return ReachSpec{split_names(arg)};
  if (kind == "safe") return SafeSpec{split_names(arg)};
  if (kind == "ltl") {
    LtlSpec s{parse_ltl(arg, propositions), std::nullopt, propositions};
    if (!automaton_path.empty()) s.automaton = buchi_from_json(load_json(automaton_path));
    return s;
  }
  if (kind == "drm") {
    auto at = arg.rfind('@');
    if (at == std::string::npos)
      throw std::invalid_argument("discounted spec must look like drm:file@gamma");
    auto machine = machine_from_json(load_json(arg.substr(0, at)));
    return DiscountedRmSpec{machine, Discount(std::stod(arg.substr(at + 1)))};
  }
  if (kind == "avgrm")
    return LimitAvgRmSpec{machine_from_json(load_json(arg))};
  throw std::invalid_argument("unknown spec kind: " + kind);
}

}  // namespace rltrans
