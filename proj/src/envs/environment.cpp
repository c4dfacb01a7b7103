#include "tta/envs/environment.hpp"

#include "tta/envs/fs_env.hpp"
#include "tta/envs/web_env.hpp"
#include "tta/errors.hpp"
#include "tta/util.hpp"

namespace tta::env {

using json = nlohmann::json;

std::string to_string(StepOutcome outcome) {
  switch (outcome) {
    case StepOutcome::Ok: return "ok";
    case StepOutcome::InvalidAction: return "invalid_action";
    case StepOutcome::Terminal: return "terminal";
  }
  return "?";
}

const TaskSpec& Environment::task(const std::string& task_id) const {
  for (const auto& t : tasks()) {
    if (t.id == task_id) return t;
  }
  throw UnknownTaskError("environment " + id() + " has no task '" + task_id + "'");
}

Observation Environment::reset(const std::string& task_id, std::uint64_t seed) {
  return reset(task(task_id), seed);
}

std::vector<TaskSpec> parse_tasks(const json& tasks) {
  std::vector<TaskSpec> out;
  for (const auto& t : tasks) {
    TaskSpec spec;
    spec.id = t.at("id").get<std::string>();
    if (t.contains("turns")) {
      spec.turns = t["turns"].get<std::vector<std::string>>();
    } else {
      spec.turns = {t.at("instruction").get<std::string>()};
    }
    if (spec.turns.empty()) throw FormatError("task " + spec.id + " has no instruction");
    spec.category = t.value("category", "plain");
    spec.max_steps = t.value("max_steps", 30);
    spec.fixture = t.value("fixture", "default");
    spec.success = t.value("success", json::array());
    for (const auto& existing : out) {
      if (existing.id == spec.id) throw FormatError("duplicate task id " + spec.id);
    }
    out.push_back(std::move(spec));
  }
  return out;
}

std::unique_ptr<Environment> load_environment(const std::filesystem::path& fixture_file) {
  json fixture;
  try {
    fixture = json::parse(read_file(fixture_file));
  } catch (const json::exception& e) {
    throw FormatError(fixture_file.string() + ": " + e.what());
  }
  if (fixture.value("format_version", 0) != kFixtureFormatVersion) {
    throw FormatError(fixture_file.string() + ": unsupported fixture format_version");
  }
  try {
    const std::string kind = fixture.at("kind").get<std::string>();
    if (kind == "web") return WebEnv::from_json(fixture);
    if (kind == "function_calling") return FsEnv::from_json(fixture);
    throw FormatError(fixture_file.string() + ": unknown environment kind " + kind);
  } catch (const json::exception& e) {
    throw FormatError(fixture_file.string() + ": " + e.what());
  }
}

std::filesystem::path builtin_fixture_path(const std::string& env_id) {
  if (env_id == "web") return data_dir() / "envs" / "web_travel.json";
  if (env_id == "fs") return data_dir() / "envs" / "fs.json";
  throw ConfigError("unknown environment id '" + env_id + "' (expected web or fs)");
}

std::unique_ptr<Environment> make_builtin_environment(const std::string& env_id) {
  return load_environment(builtin_fixture_path(env_id));
}

}  // namespace tta::env
