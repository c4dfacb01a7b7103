#include <atomic>
#include <iostream>
#include <thread>

#include "tta/errors.hpp"
#include "tta/grounding/pipeline.hpp"
#include "tta/harness/harness.hpp"
#include "tta/util.hpp"

namespace tta::harness {

using json = nlohmann::json;

ExploreConfig ExploreConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  ExploreConfig c;
  c.base_dir = base_dir;
  try {
    c.env = j.value("env", c.env);
    auto role = [&](const char* key) {
      if (j.contains(key)) return llm::BackendConfig::from_json(j[key], base_dir);
      if (j.contains("backend")) return llm::BackendConfig::from_json(j["backend"], base_dir);
      throw ConfigError(std::string("explore config needs '") + key + "' or 'backend'");
    };
    c.synthesizer = role("synthesizer");
    c.explorer = role("explorer");
    c.extractor = role("extractor");
    c.filter = role("filter");
    c.n = j.value("n", c.n);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.seed = j.value("seed", c.seed);
    c.on_the_fly = j.value("on_the_fly", c.on_the_fly);
    c.concurrency = j.value("concurrency", c.concurrency);
    if (j.contains("output")) {
      const std::filesystem::path out(j["output"].get<std::string>());
      c.output = (out.is_absolute() || base_dir.empty()) ? out : base_dir / out;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("explore config: ") + e.what());
  }
  c.validate();
  return c;
}

void ExploreConfig::validate() const {
  if (n < 1) throw ConfigError("n must be at least 1");
  if (max_steps < 1) throw ConfigError("max_steps must be at least 1");
  if (concurrency < 1) throw ConfigError("concurrency must be at least 1");
  for (const auto* b : {&synthesizer, &explorer, &extractor, &filter}) b->validate();
}

std::filesystem::path raw_rules_path(const std::filesystem::path& filtered_path) {
  auto p = filtered_path;
  const std::string ext = p.has_extension() ? p.extension().string() : ".json";
  return p.replace_extension(".raw" + ext);
}

ExploreSummary cmd_explore(const ExploreConfig& config) {
  config.validate();
  const auto environment = open_environment(config.env, config.base_dir);
  const auto synthesizer = llm::make_backend(config.synthesizer);
  const auto explorer = llm::make_backend(config.explorer);
  const auto extractor = llm::make_backend(config.extractor);
  const auto filter = llm::make_backend(config.filter);
  const bool web = environment->kind() == env::EnvKind::Web;

  std::vector<std::string> prompts;
  if (web) {
    auto probe = environment->fresh();
    const std::string site = probe->reset(probe->tasks().front(), config.seed).url;
    for (const auto& p : grounding::synthesize_personas(*synthesizer, site, environment->description(), config.n)) {
      prompts.push_back(p.persona + ": " + p.description);
    }
  } else {
    prompts = grounding::synthesize_goals(*synthesizer, environment->description(), environment->render_tools(),
                                          config.n);
  }

  std::vector<grounding::ExploreResult> results(prompts.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < prompts.size(); i = next++) {
      auto env = environment->fresh();
      grounding::ExploreOptions options;
      options.max_steps = config.max_steps;
      options.on_the_fly = config.on_the_fly;
      options.seed = config.seed + i;
      options.episode_id = std::string(web ? "persona-" : "goal-") + std::to_string(i + 1);
      results[i] = grounding::explore(*env, *explorer, prompts[i], *extractor, options);
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config.concurrency), prompts.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  ExploreSummary summary;
  summary.raw.env = environment->id();
  summary.raw.provenance = {extractor->model_id(), static_cast<int>(prompts.size()), false};
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    if (r.error) summary.warnings.push_back("episode " + std::to_string(i + 1) + ": " + *r.error);
    for (const auto& s : r.skipped) summary.warnings.push_back("episode " + std::to_string(i + 1) + ": " + s);
    summary.raw.rules.insert(summary.raw.rules.end(), r.rules.begin(), r.rules.end());
  }
  grounding::save_rules(summary.raw, raw_rules_path(config.output));
  if (summary.raw.empty()) throw RuleSetError("exploration produced no rules; raw set saved to " +
                                              raw_rules_path(config.output).string());

  std::string warning;
  summary.filtered = grounding::filter_rules(*filter, summary.raw, environment->kind(), &warning);
  if (!warning.empty()) summary.warnings.push_back(warning);
  grounding::save_rules(summary.filtered, config.output);
  return summary;
}

}  // namespace tta::harness
