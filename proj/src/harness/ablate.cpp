#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "tta/errors.hpp"
#include "tta/harness/harness.hpp"
#include "tta/util.hpp"

namespace tta::harness {

using json = nlohmann::json;

namespace {

std::string format_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::filesystem::path checkpoint_path(const AblationConfig& c) {
  if (!c.checkpoint.empty()) return c.checkpoint;
  auto p = c.output;
  p += ".ckpt.jsonl";
  return p;
}

std::map<std::string, AblationRow> load_checkpoint(const std::filesystem::path& path) {
  std::map<std::string, AblationRow> done;
  if (!std::filesystem::exists(path)) return done;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    // A sweep killed mid-write leaves a truncated last line; that cell reruns.
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("key")) continue;
    AblationRow row;
    row.episodes = j.at("episodes").get<int>();
    row.successes = j.at("successes").get<int>();
    row.success_rate = j.at("success_rate").get<double>();
    row.mean_steps = j.at("mean_steps").get<double>();
    done[j.at("key").get<std::string>()] = row;
  }
  return done;
}

}  // namespace

std::string AblationCell::key() const {
  return env + "|" + model + "|" + format_double("%.17g", learning_rate) + "|" + std::to_string(update_steps) + "|" +
         reset_policy + "|" + rules;
}

AblationConfig AblationConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  AblationConfig c;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return (path.is_absolute() || base_dir.empty()) ? path : base_dir / path;
  };
  try {
    if (!j.contains("models") || !j["models"].is_array() || j["models"].empty()) {
      throw ConfigError("ablation config needs a nonempty models list");
    }
    for (const auto& m : j["models"]) {
      c.models.push_back({m.at("name").get<std::string>(), llm::BackendConfig::from_json(m.at("backend"), base_dir)});
    }
    // The shared run settings are read through the run config parser.
    json base = json::object();
    for (const char* key : {"tasks", "seeds", "concurrency", "context_mode", "prompt_profile", "max_steps"}) {
      if (j.contains(key)) base[key] = j[key];
    }
    base["backend"] = j["models"].front()["backend"];
    c.envs = j.value("envs", c.envs);
    base["env"] = c.envs.empty() ? "web" : c.envs.front();
    c.base = RunConfig::from_json(base, base_dir);
    if (j.contains("tasks_by_env")) {
      for (const auto& [env, filter] : j["tasks_by_env"].items()) c.tasks_by_env[env] = TaskFilter::from_json(filter);
    }
    c.learning_rates = j.value("learning_rates", c.learning_rates);
    c.update_steps = j.value("update_steps", c.update_steps);
    c.reset_policies = j.value("reset_policies", c.reset_policies);
    if (j.contains("rules")) {
      c.rules.clear();
      for (const auto& r : j["rules"]) {
        AblationRules rules{r.at("name").get<std::string>(), {}};
        if (r.contains("paths")) {
          for (const auto& [env, path] : r["paths"].items()) rules.by_env[env] = resolve(path.get<std::string>());
        }
        c.rules.push_back(std::move(rules));
      }
    }
    if (j.contains("output")) c.output = resolve(j["output"].get<std::string>());
    if (j.contains("checkpoint")) c.checkpoint = resolve(j["checkpoint"].get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("ablation config: ") + e.what());
  }
  c.validate();
  return c;
}

void AblationConfig::validate() const {
  if (envs.empty() || models.empty() || learning_rates.empty() || update_steps.empty() || reset_policies.empty() ||
      rules.empty()) {
    throw ConfigError("every ablation axis needs at least one value");
  }
  std::set<std::string> names;
  for (const auto& m : models) {
    if (!names.insert(m.name).second) throw ConfigError("duplicate model name " + m.name);
  }
  for (double lr : learning_rates) {
    if (!(lr > 0.0)) throw ConfigError("learning rates must be > 0");
  }
  for (int s : update_steps) {
    if (s < 0) throw ConfigError("update steps must be >= 0");
  }
  for (const auto& p : reset_policies) {
    if (p != "default") adapt::reset_policy_from_string(p);
  }
  for (const auto& r : rules) {
    for (const auto& env : envs) {
      if (r.name == "none") continue;
      auto it = r.by_env.find(env);
      if (it == r.by_env.end()) throw ConfigError("rules '" + r.name + "' has no path for env " + env);
      if (!std::filesystem::exists(it->second)) throw ConfigError("rules file not found: " + it->second.string());
    }
  }
  base.validate();
}

std::vector<AblationCell> ablation_grid(const AblationConfig& config) {
  std::vector<AblationCell> cells;
  for (const auto& env : config.envs) {
    for (const auto& model : config.models) {
      for (const auto& rules : config.rules) {
        for (const auto& reset : config.reset_policies) {
          for (double lr : config.learning_rates) {
            for (int steps : config.update_steps) cells.push_back({env, model.name, lr, steps, reset, rules.name});
          }
        }
      }
    }
  }
  return cells;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "env,model,learning_rate,update_steps,reset_policy,rules,episodes,successes,success_rate,mean_steps\n";
  for (const auto& r : rows) {
    out += r.cell.env + "," + r.cell.model + "," + format_double("%g", r.cell.learning_rate) + "," +
           std::to_string(r.cell.update_steps) + "," + r.cell.reset_policy + "," + r.cell.rules + "," +
           std::to_string(r.episodes) + "," + std::to_string(r.successes) + "," +
           format_double("%.4f", r.success_rate) + "," + format_double("%.3f", r.mean_steps) + "\n";
  }
  return out;
}

AblationOutcome cmd_ablate(const AblationConfig& config, std::optional<int> max_new_cells, std::ostream* progress) {
  config.validate();
  const auto ckpt = checkpoint_path(config);
  auto done = load_checkpoint(ckpt);
  const auto grid = ablation_grid(config);

  std::map<std::string, std::unique_ptr<env::Environment>> envs;
  std::map<std::string, std::unique_ptr<llm::Backend>> backends;
  std::map<std::string, grounding::RuleSet> rule_sets;

  AblationOutcome outcome;
  outcome.total = static_cast<int>(grid.size());
  if (ckpt.has_parent_path()) std::filesystem::create_directories(ckpt.parent_path());
  std::ofstream log(ckpt, std::ios::app);
  if (!log) throw Error("cannot write " + ckpt.string());

  auto emit_csv = [&] {
    std::vector<AblationRow> rows;
    for (const auto& cell : grid) {
      if (auto it = done.find(cell.key()); it != done.end()) {
        AblationRow row = it->second;
        row.cell = cell;
        rows.push_back(std::move(row));
      }
    }
    write_file(config.output, ablation_csv(rows));
    return rows;
  };

  for (const auto& cell : grid) {
    if (done.count(cell.key())) {
      ++outcome.reused;
      continue;
    }
    if (max_new_cells && outcome.computed >= *max_new_cells) break;

    RunConfig run = config.base;
    run.env = cell.env;
    if (auto it = config.tasks_by_env.find(cell.env); it != config.tasks_by_env.end()) run.tasks = it->second;
    if (cell.update_steps > 0) {
      adapt::AdaptationConfig a;
      a.learning_rate = cell.learning_rate;
      a.update_steps = cell.update_steps;
      if (cell.reset_policy != "default") a.reset_policy = adapt::reset_policy_from_string(cell.reset_policy);
      run.adaptation = a;
      run.default_reset_policy = cell.reset_policy == "default";
    } else {
      run.adaptation.reset();
    }

    auto& environment = envs[cell.env];
    if (!environment) environment = open_environment(cell.env, config.base.base_dir);
    auto& backend = backends[cell.model];
    if (!backend) {
      const auto& model = *std::find_if(config.models.begin(), config.models.end(),
                                        [&](const AblationModel& m) { return m.name == cell.model; });
      backend = llm::make_backend(model.backend);
    }
    const grounding::RuleSet* rules = nullptr;
    if (cell.rules != "none") {
      const auto& spec = *std::find_if(config.rules.begin(), config.rules.end(),
                                       [&](const AblationRules& r) { return r.name == cell.rules; });
      const std::string key = cell.rules + "|" + cell.env;
      if (!rule_sets.count(key)) rule_sets[key] = grounding::load_rules(spec.by_env.at(cell.env));
      rules = &rule_sets[key];
    }

    const auto episodes = run_episodes(run, *environment, *backend, rules);
    const auto report = aggregate(environment->id(), backend->model_id(), episodes);
    AblationRow row{cell, report.episodes, report.successes, report.success_rate, report.mean_steps};
    done[cell.key()] = row;
    log << json{{"key", cell.key()},
                {"episodes", row.episodes},
                {"successes", row.successes},
                {"success_rate", row.success_rate},
                {"mean_steps", row.mean_steps}}
               .dump()
        << "\n"
        << std::flush;
    ++outcome.computed;
    emit_csv();
    if (progress) {
      *progress << "cell " << (outcome.computed + outcome.reused) << "/" << outcome.total << " " << cell.key()
                << " success_rate=" << format_double("%.4f", row.success_rate) << "\n"
                << std::flush;
    }
  }
  outcome.rows = emit_csv();
  outcome.complete = static_cast<int>(outcome.rows.size()) == outcome.total;
  return outcome;
}

}  // namespace tta::harness
