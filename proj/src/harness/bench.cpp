#include <chrono>
#include <cstdio>
#include <limits>

#include "tta/errors.hpp"
#include "tta/harness/harness.hpp"
#include "tta/llm/local.hpp"

namespace tta::harness {

using json = nlohmann::json;

BenchConfig BenchConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  BenchConfig c;
  c.base_dir = base_dir;
  try {
    if (!j.contains("backend")) throw ConfigError("bench config needs a backend");
    c.backend = llm::BackendConfig::from_json(j["backend"], base_dir);
    c.env = j.value("env", c.env);
    c.prompts = j.value("prompts", c.prompts);
    c.decode_tokens = j.value("decode_tokens", c.decode_tokens);
    c.repetitions = j.value("repetitions", c.repetitions);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    if (j.contains("steps")) c.steps = j["steps"].get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bench config: ") + e.what());
  }
  c.validate();
  return c;
}

void BenchConfig::validate() const {
  if (prompts < 1 || decode_tokens < 1 || repetitions < 1) {
    throw ConfigError("prompts, decode_tokens and repetitions must be at least 1");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (steps.empty()) throw ConfigError("steps must not be empty");
  for (int s : steps) {
    if (s < 0) throw ConfigError("step counts must be >= 0");
  }
  backend.validate();
}

nlohmann::ordered_json LatencyTable::to_json() const {
  nlohmann::ordered_json j;
  j["baseline_ms"] = baseline_ms;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    j["rows"].push_back(
        {{"steps", r.steps}, {"ms_per_prediction", r.ms_per_prediction}, {"relative_gain_pct", r.relative_gain_pct}});
  }
  return j;
}

std::string LatencyTable::to_text() const {
  std::string out = "steps  ms_per_prediction  relative_gain_pct\n";
  char line[96];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%5d  %17.3f  %17.2f\n", r.steps, r.ms_per_prediction, r.relative_gain_pct);
    out += line;
  }
  return out;
}

LatencyTable cmd_bench_latency(const BenchConfig& config) {
  config.validate();
  if (config.backend.kind != llm::BackendKind::Local) {
    throw UnsupportedOperationError("bench-latency needs the local backend, not " + llm::to_string(config.backend.kind));
  }
  const auto backend = llm::LocalBackend::load(config.backend);
  const auto environment = open_environment(config.env, config.base_dir);

  agent::ContextOptions ctx;
  ctx.mode = agent::default_context_mode(environment->kind());
  ctx.profile = agent::PromptProfile::Compact;
  ctx.env_kind = environment->kind();
  if (ctx.env_kind == env::EnvKind::FunctionCalling) ctx.tool_docs = environment->render_tools();
  llm::CompletionOverrides overrides;
  overrides.max_tokens = config.decode_tokens;

  std::vector<std::vector<lm::TokenId>> workload;
  const auto& tasks = environment->tasks();
  for (int i = 0; i < config.prompts; ++i) {
    const auto& task = tasks[static_cast<std::size_t>(i) % tasks.size()];
    auto env = environment->fresh();
    const env::Observation obs = env->reset(task, 0);
    std::vector<agent::HistoryItem> history;
    if (ctx.mode == agent::ContextMode::FullInterleaved) {
      history.push_back({agent::HistoryItem::Kind::UserQuery, task.instruction()});
      history.push_back({agent::HistoryItem::Kind::Observation, obs.text});
    }
    const auto seq = agent::build_context(task.instruction(), &obs, history, nullptr, ctx, backend.get(), overrides);
    workload.push_back(backend->prompt_ids(seq.messages));
  }

  std::vector<int> counts = config.steps;
  if (std::find(counts.begin(), counts.end(), 0) == counts.end()) counts.insert(counts.begin(), 0);
  const std::size_t zero_at = static_cast<std::size_t>(std::find(counts.begin(), counts.end(), 0) - counts.begin());
  const auto zero = adapt::AdaptationVector::zeros(backend->adaptation_dim());
  std::vector<adapt::AdaptationConfig> updates(counts.size());
  std::vector<llm::LocalBackend::GenerateOptions> options(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    updates[c].learning_rate = config.learning_rate;
    updates[c].update_steps = std::max(1, counts[c]);
    options[c].fixed_length = true;
    if (counts[c] > 0) {
      options[c].delta = &zero;
      options[c].update = &updates[c];
    }
  }

  // Every step count runs back to back on the same prompt, starting at a
  // rotating offset, so slow drift hits all counts of a repetition alike.
  const auto reps = static_cast<std::size_t>(config.repetitions);
  std::vector<std::vector<double>> total(counts.size(), std::vector<double>(reps, 0.0));
  for (std::size_t rep = 0; rep < reps; ++rep) {
    for (const auto& prompt : workload) {
      for (std::size_t i = 0; i < counts.size(); ++i) {
        const std::size_t c = (i + rep) % counts.size();
        const auto start = std::chrono::steady_clock::now();
        backend->generate(prompt, options[c], overrides);
        const std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - start;
        total[c][rep] += elapsed.count() / static_cast<double>(workload.size());
      }
    }
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };

  LatencyTable table;
  table.baseline_ms = median(total[zero_at]);
  for (int s : config.steps) {
    const auto c = static_cast<std::size_t>(std::find(counts.begin(), counts.end(), s) - counts.begin());
    std::vector<double> ratio(reps);
    for (std::size_t rep = 0; rep < reps; ++rep) ratio[rep] = (total[c][rep] / total[zero_at][rep] - 1.0) * 100.0;
    table.rows.push_back({s, median(total[c]), s == 0 ? 0.0 : median(ratio)});
  }
  return table;
}

}  // namespace tta::harness
