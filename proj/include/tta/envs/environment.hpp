#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tta/envs/action.hpp"

namespace tta::env {

inline constexpr int kFixtureFormatVersion = 1;

struct Observation {
  std::string text;
  std::string url;  // empty for function-calling environments
  nlohmann::json structured;

  friend bool operator==(const Observation& a, const Observation& b) {
    return a.text == b.text && a.url == b.url;
  }
};

enum class StepOutcome { Ok, InvalidAction, Terminal };

std::string to_string(StepOutcome outcome);

struct StepResult {
  Observation observation;
  StepOutcome outcome = StepOutcome::Ok;
  // Set when a stop closed one user turn of a multi-turn task; carries the
  // next user query.
  std::optional<std::string> next_user_query;
};

// success is a list of checks that must all hold. Web checks: answer, page,
// booked. Function-calling checks: answer, exists, absent, is_dir, is_file,
// content, cwd.
struct TaskSpec {
  std::string id;
  std::vector<std::string> turns;  // turns[0] is the instruction p
  std::string category;            // "plain" or "surprise"
  int max_steps = 30;
  std::string fixture = "default";
  nlohmann::json success = nlohmann::json::array();

  const std::string& instruction() const { return turns.front(); }
};

struct Trajectory {
  std::vector<Action> actions;
  bool terminated = false;  // the final turn ended with stop
  std::optional<std::string> answer;
  nlohmann::json final_state;
};

// Uniform agentic environment. One instance per running episode.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string id() const = 0;
  virtual EnvKind kind() const = 0;
  virtual const std::vector<TaskSpec>& tasks() const = 0;
  const TaskSpec& task(const std::string& task_id) const;  // UnknownTaskError

  virtual Observation reset(const TaskSpec& task, std::uint64_t seed) = 0;
  Observation reset(const std::string& task_id, std::uint64_t seed);

  // LifecycleError if called before reset or after a terminal step.
  virtual StepResult step(const Action& action) = 0;

  virtual nlohmann::json snapshot() const = 0;
  bool episode_active() const { return active_; }

  // Pure in (final structured state, stop answer).
  virtual bool evaluate(const TaskSpec& task, const Trajectory& trajectory) const = 0;

  // JSON lines of function docs, or a site description paragraph for web.
  virtual std::string render_tools() const = 0;
  virtual std::string description() const = 0;

  virtual std::unique_ptr<Environment> fresh() const = 0;

 protected:
  bool active_ = false;
};

std::unique_ptr<Environment> load_environment(const std::filesystem::path& fixture_file);
// "web" or "fs", loaded from data_dir()/envs.
std::unique_ptr<Environment> make_builtin_environment(const std::string& env_id);
std::filesystem::path builtin_fixture_path(const std::string& env_id);

std::vector<TaskSpec> parse_tasks(const nlohmann::json& tasks);

}  // namespace tta::env
