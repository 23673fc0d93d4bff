// Command-line driver: validate / solve / reduce / simulate / learn /
// experiment over the JSON formats of the library.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "rltrans/io.hpp"
#include "rltrans/learn.hpp"
#include "rltrans/reduce.hpp"
#include "rltrans/refute.hpp"

namespace fs = std::filesystem;
using namespace rltrans;

namespace {

struct GlobalOpts {
  std::uint64_t seed = 0;
  double tol = 1e-9;
  std::string out = ".";
  int trials = 1000;
};

std::string out_path(const GlobalOpts& g, const std::string& name) {
  fs::create_directories(g.out);
  return (fs::path(g.out) / name).string();
}

int cmd_validate(const std::string& file, std::string type) {
  Json j = load_json(file);
  if (type.empty()) {
    if (j.contains("transitions"))
      type = "mdp";
    else if (j.contains("kind"))
      type = "machine";
    else if (j.contains("edges"))
      type = "buchi";
    else if (j.contains("q1"))
      type = "reduction";
    else
      throw std::invalid_argument("cannot detect file type; pass --type");
  }
  std::vector<std::string> problems;
  if (type == "mdp") {
    std::vector<Violation> violations;
    mdp_from_json_lenient(j, &violations);
    for (const auto& v : violations) problems.push_back(v.to_string());
  } else if (type == "machine") {
    try {
      machine_from_json(j);
    } catch (const std::exception& e) {
      problems.push_back(e.what());
    }
  } else if (type == "buchi") {
    try {
      buchi_from_json(j);
    } catch (const std::exception& e) {
      problems.push_back(e.what());
    }
  } else if (type == "reduction") {
    auto rd = descriptor_from_json(j);
    MdpShape shape;
    shape.state_count = rd.inner_state_count;
    shape.action_count = rd.inner_action_count;
    shape.initial = rd.inner_initial;
    for (const auto& v : validate_reduction(rd, shape)) problems.push_back(v.to_string());
  } else {
    throw std::invalid_argument("unknown --type " + type);
  }
  if (problems.empty()) {
    std::cout << "valid " << type << ": " << file << "\n";
    return 0;
  }
  for (const auto& p : problems) std::cout << "violation: " << p << "\n";
  return 1;
}

int cmd_solve(const GlobalOpts& g, const std::string& mdp_file,
              const std::string& spec_text, const std::string& automaton_file) {
  Mdp mdp = mdp_from_json(load_json(mdp_file));
  Specification spec = parse_spec_string(spec_text, mdp.propositions, automaton_file);
  auto opt = optimal_value(mdp, spec);
  Json out;
  out["optimalValue"] = opt.value;
  out["witness"] = policy_to_json(opt.witness);
  out["witnessValue"] = spec_value(mdp, spec, opt.witness);
  save_json(out_path(g, "solve.json"), out);
  std::cout << "J* = " << format_double(opt.value) << "\n";
  return 0;
}

int cmd_reduce(const GlobalOpts& g, const std::string& mdp_file,
               const std::string& spec_text, const std::string& kind,
               const std::string& accepting_prop, const std::string& gammas_text) {
  Mdp mdp = mdp_from_json(load_json(mdp_file));
  MdpShape shape = shape_of(mdp);

  ReductionDescriptor rd;
  std::vector<SweepPoint> sweep;
  std::vector<char> accepting(mdp.state_count, 0);
  bool have_accepting = false;
  if (!accepting_prop.empty()) {
    accepting = label_intersects(mdp, mdp.prop_mask(accepting_prop));
    have_accepting = true;
  }
  Specification spec;
  if (!spec_text.empty()) spec = parse_spec_string(spec_text, mdp.propositions);

  if (kind == "product") {
    rd = product_rm_reduction(shape, spec);
  } else if (kind == "buchiproduct") {
    const auto& ltl = std::get<LtlSpec>(spec);
    BuchiAutomaton dba;
    if (ltl.automaton) {
      dba = *ltl.automaton;
    } else {
      auto builtin = builtin_automaton(ltl.formula,
                                       static_cast<int>(mdp.propositions.size()));
      if (!builtin)
        throw std::invalid_argument(
            "formula is not a built-in form; attach an automaton");
      dba = *builtin;
    }
    auto bp = buchi_product_reduction(shape, dba);
    rd = bp.descriptor;
    // The induced product MDP (with its "acc" proposition) chains into the
    // lambda and twodiscount kinds.
    save_json(out_path(g, "product_mdp.json"),
              mdp_to_json(induced_transitions(rd, mdp)));
  } else if (kind == "multidiscount") {
    const auto& drm = std::get<DiscountedRmSpec>(spec);
    const auto& flat = std::get<RewardMachine>(drm.machine);
    if (flat.rm_state_count != 1)
      throw std::invalid_argument("multidiscount expects a single-state machine");
    Discount gamma = drm.gamma;
    if (!gammas_text.empty()) {
      std::vector<double> per_state;
      std::stringstream ss(gammas_text);
      std::string item;
      while (std::getline(ss, item, ',')) per_state.push_back(std::stod(item));
      gamma = Discount(per_state);
    }
    rd = multidiscount_reduction(shape, flat.rewards[0], gamma);
    spec = DiscountedRmSpec{flat, gamma};  // the original per-state-discount task
  } else if (kind.rfind("lambda:", 0) == 0) {
    if (!have_accepting)
      throw std::invalid_argument("lambda reduction needs --accepting-prop");
    double lambda = std::stod(kind.substr(7));
    rd = lambda_sink_reduction(shape, accepting, lambda);
    std::vector<double> grid = {0.5, 0.9, 0.99, 0.999};
    if (std::find(grid.begin(), grid.end(), lambda) == grid.end())
      grid.push_back(lambda);
    sweep = lambda_sink_sweep(mdp, accepting, grid);
  } else if (kind.rfind("twodiscount:", 0) == 0) {
    if (!have_accepting)
      throw std::invalid_argument("twodiscount reduction needs --accepting-prop");
    auto rest = kind.substr(12);
    auto comma = rest.find(',');
    if (comma == std::string::npos)
      throw std::invalid_argument("expected twodiscount:<gamma1,gamma2>");
    double g1 = std::stod(rest.substr(0, comma));
    double g2 = std::stod(rest.substr(comma + 1));
    rd = two_discount_reduction(shape, accepting, g1, g2);
    std::vector<std::pair<double, double>> grid = {
        {0.25, 0.5}, {0.45, 0.9}, {0.495, 0.99}, {0.4995, 0.999}, {g1, g2}};
    sweep = two_discount_sweep(mdp, accepting, grid);
  } else {
    throw std::invalid_argument("unknown --kind " + kind);
  }

  auto violations = validate_reduction(rd, shape);
  PreservationReport preservation;
  if (violations.empty() && (kind == "product" || kind == "multidiscount"))
    preservation = check_optimality_preservation(mdp, spec, rd, 1L << 14);
  save_json(out_path(g, "descriptor.json"), descriptor_to_json(rd));
  save_json(out_path(g, "reduction_report.json"),
            preservation_to_json(preservation, violations, sweep));
  std::cout << (violations.empty() ? "descriptor valid" : "descriptor INVALID") << "\n";
  return violations.empty() ? 0 : 1;
}

int cmd_simulate(const GlobalOpts& g, const std::string& mdp_file, long steps,
                 const std::string& policy_file) {
  Mdp mdp = mdp_from_json(load_json(mdp_file));
  MdpSimulator sim(mdp, g.seed);
  FiniteMemoryPolicy policy;
  bool have_policy = !policy_file.empty();
  if (have_policy) {
    policy = policy_from_json(load_json(policy_file));
    policy.check(mdp.state_count, mdp.action_count);
  }
  Rng action_rng(mix_seed(g.seed, 1));
  std::ostringstream csv;
  csv << "step,state,action,next\n";
  int memory = have_policy ? policy.initial_memory : 0;
  for (long t = 0; t < steps; ++t) {
    int s = sim.state();
    int a;
    if (have_policy) {
      a = action_rng.sample(policy.act[memory][s]);
    } else {
      std::vector<double> uniform(mdp.action_count, 1.0);
      a = action_rng.sample(uniform);
    }
    int next = sim.step(a);
    if (have_policy) memory = policy.update[memory][next];
    csv << t << ',' << s << ',' << a << ',' << next << '\n';
  }
  write_text_file(out_path(g, "trajectory.csv"), csv.str());
  std::cout << "final state " << sim.state() << "\n";
  return 0;
}

int cmd_learn(const GlobalOpts& g, const std::string& mdp_file,
              const std::string& spec_text, const std::string& algo, long steps,
              long eval_every) {
  Mdp mdp = mdp_from_json(load_json(mdp_file));
  Specification spec = parse_spec_string(spec_text, mdp.propositions);
  LearnerConfig cfg;
  cfg.seed = g.seed;
  cfg.step_budget = steps;
  cfg.eval_every = eval_every;
  MdpSimulator sim(mdp, g.seed);
  PolicyTrace trace;
  if (algo == "q") {
    const auto& drm = std::get<DiscountedRmSpec>(spec);
    const auto& flat = std::get<RewardMachine>(drm.machine);
    if (flat.rm_state_count != 1 || !drm.gamma.is_constant())
      throw std::invalid_argument(
          "q-learning needs a single-state machine and a constant gamma");
    trace = q_learning(sim, mdp.state_count, mdp.action_count, flat.rewards[0],
                       drm.gamma.constant(), cfg)
                .trace;
  } else if (algo == "model") {
    trace = model_based_learner(sim, shape_of(mdp), spec, cfg);
  } else {
    throw std::invalid_argument("unknown --algo " + algo);
  }
  auto convergence = convergence_trace(trace, mdp, spec);
  write_text_file(out_path(g, "trace.csv"), trace_to_csv(convergence));
  save_json(out_path(g, "policies.json"), trace_policies_to_json(trace));
  std::cout << "final gap " << format_double(convergence.back().gap) << "\n";
  return 0;
}

int cmd_experiment(const GlobalOpts& g, const std::string& name,
                   const std::string& rm_file, const std::string& arm_file,
                   double gamma, double delta, double eps, int K,
                   const std::string& learner_name) {
  ExperimentReport report;
  if (name == "thm1") {
    RewardMachine rm = rm_file.empty()
                           ? fig1_enter_b_rm()
                           : std::get<RewardMachine>(machine_from_json(load_json(rm_file)));
    report = synthesize_thm1_counterexample(rm, gamma);
  } else if (name == "thm3") {
    AbstractRewardMachine arm =
        arm_file.empty()
            ? build_reach_arm({"b"}, {"b"})
            : std::get<AbstractRewardMachine>(machine_from_json(load_json(arm_file)));
    report = analyze_arm_for_buchi(arm).report;
  } else if (name == "robustness") {
    report = robustness_experiment(delta, eps);
  } else if (name == "pac") {
    PacLearner learner =
        learner_name == "q" ? PacLearner::QAdapter : PacLearner::ModelBased;
    report = pac_indistinguishability_experiment(learner, eps, K, delta, g.trials,
                                                 g.seed);
  } else {
    throw std::invalid_argument("unknown experiment " + name);
  }
  save_json(out_path(g, name + "_report.json"), experiment_to_json(report));
  write_text_file(out_path(g, name + "_summary.csv"), experiment_to_csv(report));
  for (const auto& v : report.verdicts)
    std::cout << (v.pass ? "pass " : "FAIL ") << v.name << "\n";
  return report.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task transformations for reinforcement learning: exact MDP "
               "oracles, specification classes, sampling-based reductions, "
               "tabular learners, and counterexample experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOpts g;
  app.add_option("--seed", g.seed, "global 64-bit seed");
  app.add_option("--tol", g.tol, "tolerance override");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--trials", g.trials, "trial count for experiments");

  std::string file, type, spec_text, automaton_file, kind, accepting_prop;
  std::string policy_file, algo = "model", learner = "model", rm_file, arm_file;
  std::string gammas_text;
  long steps = 100000, eval_every = 1000;
  double gamma = 0.5, delta = 0.1, eps = 0.25;
  int K = 21;

  auto* validate = app.add_subcommand("validate", "check a JSON artifact");
  validate->add_option("file", file)->required();
  validate->add_option("--type", type, "mdp|machine|buchi|reduction");

  auto* solve = app.add_subcommand("solve", "optimal value and witness policy");
  solve->add_option("file", file)->required();
  solve->add_option("--spec", spec_text)->required();
  solve->add_option("--automaton", automaton_file);

  auto* reduce = app.add_subcommand("reduce", "build a sampling-based reduction");
  reduce->add_option("file", file)->required();
  reduce->add_option("--kind", kind)->required();
  reduce->add_option("--spec", spec_text);
  reduce->add_option("--accepting-prop", accepting_prop);
  reduce->add_option("--gammas", gammas_text, "per-state discounts, comma separated");

  auto* simulate = app.add_subcommand("simulate", "roll out a simulator");
  simulate->add_option("file", file)->required();
  simulate->add_option("--steps", steps);
  simulate->add_option("--policy", policy_file);

  auto* learn = app.add_subcommand("learn", "run a tabular learner");
  learn->add_option("file", file)->required();
  learn->add_option("--spec", spec_text)->required();
  learn->add_option("--algo", algo, "q|model");
  learn->add_option("--steps", steps);
  learn->add_option("--eval-every", eval_every);

  auto* experiment = app.add_subcommand("experiment", "run a counterexample experiment");
  experiment->add_option("name", file)->required();
  experiment->add_option("--rm", rm_file);
  experiment->add_option("--arm", arm_file);
  experiment->add_option("--gamma", gamma);
  experiment->add_option("--delta", delta);
  experiment->add_option("--eps", eps);
  experiment->add_option("--K", K);
  experiment->add_option("--learner", learner, "model|q");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return cmd_validate(file, type);
    if (solve->parsed()) return cmd_solve(g, file, spec_text, automaton_file);
    if (reduce->parsed())
      return cmd_reduce(g, file, spec_text, kind, accepting_prop, gammas_text);
    if (simulate->parsed()) return cmd_simulate(g, file, steps, policy_file);
    if (learn->parsed()) return cmd_learn(g, file, spec_text, algo, steps, eval_every);
    if (experiment->parsed())
      return cmd_experiment(g, file, rm_file, arm_file, gamma, delta, eps, K, learner);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
