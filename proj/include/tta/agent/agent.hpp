#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tta/adapt/adaptation.hpp"
#include "tta/envs/environment.hpp"
#include "tta/grounding/rules.hpp"
#include "tta/llm/backend.hpp"

namespace tta::agent {

inline constexpr int kTrajectorySchemaVersion = 1;

// last_obs: instruction, current observation and the list of previous
// actions. full_interleaved: every user query, action and environment
// response as chat turns, for environments with short observations.
enum class ContextMode { LastObs, FullInterleaved };
enum class PromptProfile { Verbose, Compact };

std::string to_string(ContextMode mode);
ContextMode context_mode_from_string(const std::string& s);
std::string to_string(PromptProfile profile);
PromptProfile prompt_profile_from_string(const std::string& s);

ContextMode default_context_mode(env::EnvKind kind);
adapt::ResetPolicy default_reset_policy(env::EnvKind kind);

struct HistoryItem {
  enum class Kind { UserQuery, Action, Observation };
  Kind kind = Kind::Action;
  std::string text;

  friend bool operator==(const HistoryItem&, const HistoryItem&) = default;
};

struct ContextOptions {
  ContextMode mode = ContextMode::LastObs;
  PromptProfile profile = PromptProfile::Verbose;
  env::EnvKind env_kind = env::EnvKind::Web;
  std::string tool_docs;  // function-calling environments only
};

struct ContextSequence {
  std::string instruction;
  std::string observation;
  std::string url;
  std::vector<HistoryItem> history;
  std::vector<grounding::DynamicsRule> rules;
  std::vector<llm::ChatMessage> messages;
  bool truncated = false;
  std::size_t dropped = 0;
};

// Renders the model input. With a backend, the oldest droppable history
// entries are removed until the prompt fits; the instruction, the current
// observation and the rules are never dropped (CapacityError if they alone
// do not fit). In full_interleaved mode obs may be null: the observation is
// then the last history entry.
ContextSequence build_context(const std::string& instruction, const env::Observation* obs,
                              std::vector<HistoryItem> history, const grounding::RuleSet* rules,
                              const ContextOptions& options, const llm::Backend* backend = nullptr,
                              const llm::CompletionOverrides& overrides = {});

// Contents of the last complete ``` fenced block, without a language tag.
std::optional<std::string> last_fenced_block(std::string_view raw);

// Never throws: unparseable text yields an InvalidAction carrying the raw text.
env::Action parse_action(std::string_view raw, env::EnvKind kind);

struct StepRecord {
  int index = 0;
  int turn = 0;
  std::string obs_hash;
  std::string raw_action;
  std::string action;  // canonical form
  env::StepOutcome outcome = env::StepOutcome::Ok;
  bool truncated = false;
  std::optional<adapt::UpdateReport> update;
  double wall_ms = 0.0;
};

struct EpisodeResult {
  std::string env_id;
  std::string task_id;
  std::uint64_t seed = 0;
  bool success = false;
  int steps = 0;
  bool terminated = false;
  std::optional<std::string> answer;
  std::optional<std::string> error;  // "<tag>: message"
  std::vector<StepRecord> records;
  nlohmann::json final_state;
  double wall_ms = 0.0;
};

struct EpisodeOptions {
  ContextMode mode = ContextMode::LastObs;
  PromptProfile profile = PromptProfile::Verbose;
  std::uint64_t seed = 0;
  const grounding::RuleSet* rules = nullptr;
  std::optional<adapt::AdaptationConfig> adaptation;
  bool record_timing = false;
  std::optional<int> max_steps;  // overrides the task budget
};

// Runs one episode. Backend failures end the episode with an error tag
// instead of propagating.
EpisodeResult run_episode(env::Environment& env, const env::TaskSpec& task, llm::Backend& backend,
                          const EpisodeOptions& options);

// One JSON line per step followed by an end record. Wall-clock fields appear
// only when the episode recorded timing.
std::string trajectory_jsonl(const EpisodeResult& result, bool include_timing = false);

}  // namespace tta::agent
