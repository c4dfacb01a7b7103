#include <atomic>
#include <sstream>
#include <thread>

#include "tta/errors.hpp"
#include "tta/harness/harness.hpp"
#include "tta/util.hpp"

namespace tta::harness {

using json = nlohmann::json;

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["env"] = env;
  j["model"] = model;
  j["episodes"] = episodes;
  j["successes"] = successes;
  j["success_rate"] = success_rate;
  j["mean_steps"] = mean_steps;
  j["per_seed"] = nlohmann::ordered_json::array();
  for (const auto& s : per_seed) {
    j["per_seed"].push_back(
        {{"seed", s.seed}, {"episodes", s.episodes}, {"successes", s.successes}, {"success_rate", s.success_rate}});
  }
  j["per_task"] = nlohmann::ordered_json::array();
  for (const auto& e : per_task) {
    nlohmann::ordered_json t{{"task", e.task}, {"seed", e.seed}, {"success", e.success}, {"steps", e.steps}};
    t["error"] = e.error ? nlohmann::ordered_json(*e.error) : nlohmann::ordered_json(nullptr);
    j["per_task"].push_back(std::move(t));
  }
  return j;
}

MetricsReport aggregate(const std::string& env_id, const std::string& model,
                        const std::vector<agent::EpisodeResult>& episodes) {
  MetricsReport r;
  r.env = env_id;
  r.model = model;
  long total_steps = 0;
  for (const auto& e : episodes) {
    ++r.episodes;
    r.successes += e.success ? 1 : 0;
    total_steps += e.steps;
    r.per_task.push_back({e.task_id, e.seed, e.success, e.steps, e.error});
    auto it = std::find_if(r.per_seed.begin(), r.per_seed.end(), [&](const SeedSummary& s) { return s.seed == e.seed; });
    if (it == r.per_seed.end()) it = r.per_seed.insert(r.per_seed.end(), SeedSummary{e.seed, 0, 0, 0.0});
    ++it->episodes;
    it->successes += e.success ? 1 : 0;
  }
  for (auto& s : r.per_seed) s.success_rate = static_cast<double>(s.successes) / s.episodes;
  if (r.episodes > 0) {
    r.success_rate = static_cast<double>(r.successes) / r.episodes;
    r.mean_steps = static_cast<double>(total_steps) / r.episodes;
  }
  return r;
}

double success_rate_from_jsonl(const std::string& jsonl) {
  std::istringstream in(jsonl);
  std::string line;
  int episodes = 0;
  int successes = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const json j = json::parse(line);
    if (j.at("type") != "end") continue;
    ++episodes;
    successes += j.at("success").get<bool>() ? 1 : 0;
  }
  if (episodes == 0) throw FormatError("trajectory log has no end records");
  return static_cast<double>(successes) / episodes;
}

std::vector<agent::EpisodeResult> run_episodes(const RunConfig& config, const env::Environment& environment,
                                               llm::Backend& backend, const grounding::RuleSet* rules) {
  const auto tasks = select_tasks(environment, config.tasks);
  struct Job {
    const env::TaskSpec* task;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (auto seed : config.seeds) {
    for (const auto& t : tasks) jobs.push_back({&t, seed});
  }

  agent::EpisodeOptions base;
  base.mode = config.context_mode.value_or(agent::default_context_mode(environment.kind()));
  base.profile = config.profile.value_or(agent::PromptProfile::Verbose);
  base.rules = rules;
  base.adaptation = config.adaptation;
  if (base.adaptation && config.default_reset_policy) {
    base.adaptation->reset_policy = agent::default_reset_policy(environment.kind());
  }
  base.record_timing = config.record_timing;
  base.max_steps = config.max_steps;

  std::vector<agent::EpisodeResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      auto env = environment.fresh();
      agent::EpisodeOptions options = base;
      options.seed = jobs[i].seed;
      results[i] = agent::run_episode(*env, *jobs[i].task, backend, options);
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config.concurrency), jobs.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  return results;
}

MetricsReport cmd_run(const RunConfig& config) {
  config.validate();
  const auto environment = open_environment(config.env, config.base_dir);
  const auto backend = llm::make_backend(config.backend);
  std::optional<grounding::RuleSet> rules;
  if (config.rules_path) rules = grounding::load_rules(*config.rules_path);

  const auto episodes = run_episodes(config, *environment, *backend, rules ? &*rules : nullptr);
  std::string log;
  for (const auto& e : episodes) log += agent::trajectory_jsonl(e, config.record_timing);
  MetricsReport report = aggregate(environment->id(), backend->model_id(), episodes);

  write_file(config.output_dir / "trajectories.jsonl", log);
  write_file(config.output_dir / "report.json", report.to_json().dump(2) + "\n");
  return report;
}

}  // namespace tta::harness
