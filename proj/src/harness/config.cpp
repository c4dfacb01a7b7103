#include <cstdlib>
#include <regex>

#include "tta/errors.hpp"
#include "tta/harness/harness.hpp"
#include "tta/util.hpp"

namespace tta::harness {

using json = nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return (path.is_absolute() || base.empty()) ? path : base / path;
}

std::string interpolate_string(const std::string& s) {
  static const std::regex kVar(R"(\$\{([A-Za-z_][A-Za-z0-9_]*)\})");
  std::string out;
  auto begin = std::sregex_iterator(s.begin(), s.end(), kVar);
  std::size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    out.append(s, last, static_cast<std::size_t>(m.position()) - last);
    const char* value = std::getenv(m[1].str().c_str());
    if (!value) throw ConfigError("config references unset environment variable " + m[1].str());
    out += value;
    last = static_cast<std::size_t>(m.position() + m.length());
  }
  out.append(s, last);
  return out;
}

}  // namespace

json interpolate_env(const json& j) {
  if (j.is_string()) return interpolate_string(j.get<std::string>());
  if (j.is_array()) {
    json out = json::array();
    for (const auto& v : j) out.push_back(interpolate_env(v));
    return out;
  }
  if (j.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : j.items()) out[k] = interpolate_env(v);
    return out;
  }
  return j;
}

json load_config_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("config file is not a JSON object: " + path.string());
  return interpolate_env(j);
}

std::unique_ptr<env::Environment> open_environment(const std::string& env, const std::filesystem::path& base_dir) {
  if (env == "web" || env == "fs") return env::make_builtin_environment(env);
  const auto path = resolve(base_dir, env);
  if (!std::filesystem::exists(path)) throw ConfigError("environment fixture not found: " + path.string());
  return env::load_environment(path);
}

TaskFilter TaskFilter::from_json(const json& j) {
  TaskFilter f;
  if (j.is_null()) return f;
  if (j.is_string()) {
    f.pattern = j.get<std::string>();
    return f;
  }
  if (j.is_array()) {
    f.ids = j.get<std::vector<std::string>>();
    return f;
  }
  if (j.contains("category")) f.category = j["category"].get<std::string>();
  if (j.contains("ids")) f.ids = j["ids"].get<std::vector<std::string>>();
  if (j.contains("pattern")) f.pattern = j["pattern"].get<std::string>();
  return f;
}

json TaskFilter::to_json() const {
  json j = json::object();
  if (category) j["category"] = *category;
  if (!ids.empty()) j["ids"] = ids;
  if (pattern) j["pattern"] = *pattern;
  return j;
}

std::vector<env::TaskSpec> select_tasks(const env::Environment& environment, const TaskFilter& filter) {
  std::optional<std::regex> re;
  if (filter.pattern) {
    try {
      re.emplace(*filter.pattern);
    } catch (const std::regex_error& e) {
      throw ConfigError("bad task pattern '" + *filter.pattern + "': " + e.what());
    }
  }
  for (const auto& id : filter.ids) environment.task(id);  // UnknownTaskError for typos
  std::vector<env::TaskSpec> out;
  for (const auto& t : environment.tasks()) {
    if (filter.category && t.category != *filter.category) continue;
    if (!filter.ids.empty() && std::find(filter.ids.begin(), filter.ids.end(), t.id) == filter.ids.end()) continue;
    if (re && !std::regex_search(t.id, *re)) continue;
    out.push_back(t);
  }
  if (out.empty()) throw ConfigError("no tasks selected");
  return out;
}

adapt::AdaptationConfig adaptation_from_json(const json& j) {
  adapt::AdaptationConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.update_steps = j.value("update_steps", c.update_steps);
  if (j.contains("reset_policy")) c.reset_policy = adapt::reset_policy_from_string(j["reset_policy"].get<std::string>());
  c.validate();
  return c;
}

json to_json(const adapt::AdaptationConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"update_steps", c.update_steps},
          {"reset_policy", adapt::to_string(c.reset_policy)}};
}

void RunConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (concurrency < 1) throw ConfigError("concurrency must be at least 1");
  if (max_steps && *max_steps < 1) throw ConfigError("max_steps must be at least 1");
  if (rules_path && !std::filesystem::exists(*rules_path)) {
    throw ConfigError("rules file not found: " + rules_path->string());
  }
  if (env != "web" && env != "fs" && !std::filesystem::exists(resolve(base_dir, env))) {
    throw ConfigError("environment fixture not found: " + env);
  }
  if (backend.kind == llm::BackendKind::Scripted && !std::filesystem::exists(backend.script_path)) {
    throw ConfigError("scripted policy not found: " + backend.script_path.string());
  }
  if (adaptation) adaptation->validate();
  backend.validate();
}

RunConfig RunConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  try {
    c.env = j.value("env", c.env);
    if (j.contains("tasks")) c.tasks = TaskFilter::from_json(j["tasks"]);
    if (!j.contains("backend")) throw ConfigError("run config needs a backend");
    c.backend = llm::BackendConfig::from_json(j["backend"], base_dir);
    if (j.contains("adaptation") && !j["adaptation"].is_null()) {
      c.adaptation = adaptation_from_json(j["adaptation"]);
      c.default_reset_policy = !j["adaptation"].contains("reset_policy");
    }
    if (j.contains("rules") && !j["rules"].is_null()) c.rules_path = resolve(base_dir, j["rules"].get<std::string>());
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
    c.concurrency = j.value("concurrency", c.concurrency);
    if (j.contains("context_mode")) c.context_mode = agent::context_mode_from_string(j["context_mode"].get<std::string>());
    if (j.contains("prompt_profile")) c.profile = agent::prompt_profile_from_string(j["prompt_profile"].get<std::string>());
    if (j.contains("max_steps")) c.max_steps = j["max_steps"].get<int>();
    c.record_timing = j.value("record_timing", false);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  c.validate();
  return c;
}

json RunConfig::to_json() const {
  json j{{"env", env}, {"tasks", tasks.to_json()}, {"backend", backend.to_json()}, {"seeds", seeds},
         {"concurrency", concurrency}, {"record_timing", record_timing}};
  j["adaptation"] = adaptation ? harness::to_json(*adaptation) : json(nullptr);
  j["rules"] = rules_path ? json(rules_path->string()) : json(nullptr);
  j["output_dir"] = output_dir.string();
  if (context_mode) j["context_mode"] = agent::to_string(*context_mode);
  if (profile) j["prompt_profile"] = agent::to_string(*profile);
  if (max_steps) j["max_steps"] = *max_steps;
  return j;
}

}  // namespace tta::harness
