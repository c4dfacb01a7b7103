#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tta/adapt/adaptation.hpp"
#include "tta/agent/agent.hpp"
#include "tta/envs/environment.hpp"
#include "tta/grounding/rules.hpp"
#include "tta/llm/backend.hpp"

namespace tta::harness {

// Replaces ${NAME} in every string value with the environment variable NAME.
// ConfigError when a referenced variable is unset.
nlohmann::json interpolate_env(const nlohmann::json& j);

// Parses a JSON config file and interpolates environment variables.
nlohmann::json load_config_file(const std::filesystem::path& path);

// "web"/"fs" name a bundled fixture; anything else is a fixture file path.
std::unique_ptr<env::Environment> open_environment(const std::string& env, const std::filesystem::path& base_dir = {});

struct TaskFilter {
  std::optional<std::string> category;
  std::vector<std::string> ids;
  std::optional<std::string> pattern;  // ECMAScript regex over task ids

  static TaskFilter from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// ConfigError "no tasks selected" when nothing matches. Keeps fixture order.
std::vector<env::TaskSpec> select_tasks(const env::Environment& environment, const TaskFilter& filter);

adapt::AdaptationConfig adaptation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const adapt::AdaptationConfig& config);

struct RunConfig {
  std::string env = "web";
  TaskFilter tasks;
  llm::BackendConfig backend;
  std::optional<adapt::AdaptationConfig> adaptation;
  // When the config names no reset policy, the environment's default applies.
  bool default_reset_policy = true;
  std::optional<std::filesystem::path> rules_path;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output_dir = "runs/latest";
  int concurrency = 1;
  std::optional<agent::ContextMode> context_mode;
  std::optional<agent::PromptProfile> profile;
  std::optional<int> max_steps;
  bool record_timing = false;
  std::filesystem::path base_dir;  // where relative fixture paths resolve

  // ConfigError on empty seeds, a bad cap or a missing referenced file.
  void validate() const;
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  nlohmann::json to_json() const;
};

struct EpisodeSummary {
  std::string task;
  std::uint64_t seed = 0;
  bool success = false;
  int steps = 0;
  std::optional<std::string> error;
};

struct SeedSummary {
  std::uint64_t seed = 0;
  int episodes = 0;
  int successes = 0;
  double success_rate = 0.0;
};

struct MetricsReport {
  std::string env;
  std::string model;
  int episodes = 0;
  int successes = 0;
  double success_rate = 0.0;
  double mean_steps = 0.0;
  std::vector<SeedSummary> per_seed;
  std::vector<EpisodeSummary> per_task;

  nlohmann::ordered_json to_json() const;
};

MetricsReport aggregate(const std::string& env_id, const std::string& model,
                        const std::vector<agent::EpisodeResult>& episodes);

// Success rate over the end records of a trajectory log.
double success_rate_from_jsonl(const std::string& jsonl);

// Runs every selected task for every seed with at most config.concurrency
// episodes in flight. Results come back in (seed, task) order.
std::vector<agent::EpisodeResult> run_episodes(const RunConfig& config, const env::Environment& environment,
                                               llm::Backend& backend, const grounding::RuleSet* rules);

// Evaluates and writes output_dir/trajectories.jsonl and output_dir/report.json.
MetricsReport cmd_run(const RunConfig& config);

struct ExploreConfig {
  std::string env = "web";
  llm::BackendConfig synthesizer;
  llm::BackendConfig explorer;
  llm::BackendConfig extractor;
  llm::BackendConfig filter;
  int n = 10;
  int max_steps = 30;
  std::uint64_t seed = 0;
  bool on_the_fly = true;
  int concurrency = 1;
  std::filesystem::path output = "rules.json";
  std::filesystem::path base_dir;

  // Each role falls back to "backend" when its own key is absent.
  static ExploreConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  void validate() const;
};

// rules.json -> rules.raw.json
std::filesystem::path raw_rules_path(const std::filesystem::path& filtered_path);

struct ExploreSummary {
  grounding::RuleSet raw;
  grounding::RuleSet filtered;
  std::vector<std::string> warnings;
};

// Synthesizes n personas or goals, explores once per item, filters and saves
// both the raw and the filtered rule sets. The raw set is written before
// filtering so it survives a filter failure.
ExploreSummary cmd_explore(const ExploreConfig& config);

struct BenchConfig {
  llm::BackendConfig backend;
  std::string env = "web";
  int prompts = 4;
  int decode_tokens = 16;
  int repetitions = 5;
  double learning_rate = 0.1;
  std::vector<int> steps{0, 1, 2, 3, 4, 5};
  std::filesystem::path base_dir;

  static BenchConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  void validate() const;
};

struct LatencyRow {
  int steps = 0;
  double ms_per_prediction = 0.0;
  double relative_gain_pct = 0.0;
};

struct LatencyTable {
  double baseline_ms = 0.0;
  std::vector<LatencyRow> rows;

  nlohmann::ordered_json to_json() const;
  std::string to_text() const;
};

// Times one model prediction (prompt encoding, optional delta update and a
// fixed-length decode) for each update-step count. Times are medians over
// repetitions; gains are medians of the per-repetition ratio to step 0.
// UnsupportedOperationError for anything but the local backend.
LatencyTable cmd_bench_latency(const BenchConfig& config);

struct AblationModel {
  std::string name;
  llm::BackendConfig backend;
};

struct AblationRules {
  std::string name;                                      // e.g. none, raw, filtered
  std::map<std::string, std::filesystem::path> by_env;  // empty for "none"
};

struct AblationConfig {
  RunConfig base;  // task filter, seeds, concurrency and budget for every cell
  std::map<std::string, TaskFilter> tasks_by_env;  // overrides base.tasks per env
  std::vector<std::string> envs{"web"};
  std::vector<AblationModel> models;
  std::vector<double> learning_rates{0.1, 1.0};
  std::vector<int> update_steps{1, 2, 3, 4, 5};  // 0 disables adaptation
  std::vector<std::string> reset_policies{"default"};
  std::vector<AblationRules> rules{{"none", {}}};
  std::filesystem::path output = "ablation.csv";
  std::filesystem::path checkpoint;  // defaults to output + ".ckpt.jsonl"

  static AblationConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  void validate() const;
};

struct AblationCell {
  std::string env;
  std::string model;
  double learning_rate = 0.0;
  int update_steps = 0;
  std::string reset_policy;
  std::string rules;

  std::string key() const;
};

struct AblationRow {
  AblationCell cell;
  int episodes = 0;
  int successes = 0;
  double success_rate = 0.0;
  double mean_steps = 0.0;
};

struct AblationOutcome {
  int total = 0;
  int computed = 0;
  int reused = 0;
  bool complete = false;
  std::vector<AblationRow> rows;  // grid order, completed cells only
};

std::vector<AblationCell> ablation_grid(const AblationConfig& config);
std::string ablation_csv(const std::vector<AblationRow>& rows);

// Cells already in the checkpoint are reused, not recomputed. max_new_cells
// stops the sweep early, as if it had been interrupted. The CSV is rewritten
// after every cell.
AblationOutcome cmd_ablate(const AblationConfig& config, std::optional<int> max_new_cells = std::nullopt,
                           std::ostream* progress = nullptr);

}  // namespace tta::harness
