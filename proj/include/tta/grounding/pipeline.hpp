#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tta/envs/environment.hpp"
#include "tta/grounding/rules.hpp"
#include "tta/llm/backend.hpp"

namespace tta::grounding {

struct Persona {
  std::string persona;
  std::string description;

  friend bool operator==(const Persona&, const Persona&) = default;
};

// For web environments the observations are "URL: ...\n" plus the tree. For
// function-calling environments they are a state summary plus the output of
// the call that produced the state.
struct TransitionRecord {
  std::string obs_before;
  std::string action;
  std::string obs_after;
  int step = 0;
  std::string episode_id;
};

// First JSON value of the requested kind embedded in free text.
std::optional<nlohmann::json> extract_json(std::string_view text, bool want_array);

// Malformed replies get one reprompt, then SynthesisError.
std::vector<Persona> synthesize_personas(llm::Backend& backend, const std::string& website,
                                         const std::string& description, int n);
std::vector<std::string> synthesize_goals(llm::Backend& backend, const std::string& environment,
                                          const std::string& tool_docs, int n);

struct ExploreOptions {
  int max_steps = 30;
  bool on_the_fly = true;  // false: extract every transition after the episode
  std::uint64_t seed = 0;
  std::string episode_id;
  std::optional<double> temperature;
};

struct ExploreResult {
  std::vector<TransitionRecord> transitions;
  std::vector<DynamicsRule> rules;
  std::vector<std::string> skipped;  // extraction failures
  std::optional<std::string> error;  // backend failure that ended the episode
  bool stopped_by_probe = false;
};

ExploreResult explore(env::Environment& environment, llm::Backend& explorer, const std::string& persona_or_goal,
                      llm::Backend& extractor, const ExploreOptions& options = {});

// One rule per transition; identical observations force "no change".
// ExtractionError after one failed reprompt.
DynamicsRule extract_rule(llm::Backend& extractor, const TransitionRecord& transition, env::EnvKind kind);

// "click [3] where [3] is Go" for element actions, else the canonical form.
std::string describe_action(const env::Action& action, const std::string& observation_text);

bool is_no_change(const std::string& dynamics);
bool is_scroll_or_pagination(const DynamicsRule& rule);

// Stage one: drops "no change" rules, exact duplicates and scroll or
// pagination rules. Discovery order is kept.
std::vector<DynamicsRule> heuristic_filter(const std::vector<DynamicsRule>& rules);

// Stage two. FilteringError unless the reply is a subset of the input.
std::vector<DynamicsRule> llm_filter(llm::Backend& backend, const std::vector<DynamicsRule>& rules, env::EnvKind kind);

// Both stages, then deduplication on (initial_state, action). If the model
// stage fails, the heuristic result is used and a warning is stored.
RuleSet filter_rules(llm::Backend& backend, const RuleSet& raw, env::EnvKind kind, std::string* warning = nullptr);

std::vector<DynamicsRule> dedupe_state_action(const std::vector<DynamicsRule>& rules);

}  // namespace tta::grounding
