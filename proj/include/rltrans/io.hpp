#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "rltrans/learn.hpp"
#include "rltrans/mdp.hpp"
#include "rltrans/reduce.hpp"
#include "rltrans/refute.hpp"
#include "rltrans/specs.hpp"

namespace rltrans {

using Json = nlohmann::ordered_json;

// MDP files: propositions, states, initial, actions, per-state label sets,
// and sparse transition triples. Loading validates and rejects on any
// violation; omitted triples mean probability 0.
Json mdp_to_json(const Mdp& mdp);
Mdp mdp_from_json(const Json& j);
// As mdp_from_json but collects semantic violations instead of throwing.
Mdp mdp_from_json_lenient(const Json& j, std::vector<Violation>* violations);

Json machine_to_json(const RewardMachineLike& machine);
RewardMachineLike machine_from_json(const Json& j);

Json buchi_to_json(const BuchiAutomaton& dba);
BuchiAutomaton buchi_from_json(const Json& j);

Json spec_to_json(const Specification& spec);
Specification spec_from_json(const Json& j);

Json descriptor_to_json(const ReductionDescriptor& rd);
ReductionDescriptor descriptor_from_json(const Json& j);

Json policy_to_json(const FiniteMemoryPolicy& policy);
FiniteMemoryPolicy policy_from_json(const Json& j);

Json preservation_to_json(const PreservationReport& report,
                          const std::vector<Violation>& violations,
                          const std::vector<SweepPoint>& sweep);

Json experiment_to_json(const ExperimentReport& report);
// One CSV row per recorded trial or grid point, columns sorted by name.
std::string experiment_to_csv(const ExperimentReport& report);

std::string trace_to_csv(const std::vector<ConvergencePoint>& points);
Json trace_policies_to_json(const PolicyTrace& trace);

// Fixed-format float for CSV output: '.' decimal separator, 17 significant
// digits, locale-independent.
std::string format_double(double x);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);
Json load_json(const std::string& path);
void save_json(const std::string& path, const Json& j);

// Spec strings used by the CLI: "reach:b,c", "safe:b", "ltl:G F b",
// "drm:<machine.json>@<gamma>", "avgrm:<machine.json>". An optional
// automaton file augments ltl specs.
Specification parse_spec_string(const std::string& text,
                                const std::vector<std::string>& propositions,
                                const std::string& automaton_path = "");

}  // namespace rltrans
