#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace tta::grounding {

struct DynamicsRule {
  std::string initial_state;
  std::string action;
  std::string environmental_dynamics;

  friend bool operator==(const DynamicsRule&, const DynamicsRule&) = default;
};

struct Provenance {
  std::string extractor;
  int episodes = 0;
  bool filtered = false;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct RuleSet {
  std::string env;
  Provenance provenance;
  std::vector<DynamicsRule> rules;

  bool empty() const { return rules.empty(); }
  friend bool operator==(const RuleSet&, const RuleSet&) = default;
};

// {"initial_state", "action", "environmental_dynamics"} in that order.
nlohmann::ordered_json to_json(const DynamicsRule& rule);
// Accepts "action_taken" as an alias for "action". RuleSetError when a field
// is missing, not a string, or empty.
DynamicsRule rule_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const RuleSet& rs);
RuleSet ruleset_from_json(const nlohmann::json& j);

// A bare array of rules is accepted too, with empty env and provenance.
void save_rules(const RuleSet& rs, const std::filesystem::path& path);
RuleSet load_rules(const std::filesystem::path& path);

// Throws RuleSetError if a rule has an empty field, or if a filtered set
// repeats an (initial_state, action) pair.
void validate(const RuleSet& rs);

// One compact JSON object per line, for prompts.
std::string render_rules(const std::vector<DynamicsRule>& rules);

}  // namespace tta::grounding
