#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "tta/errors.hpp"
#include "tta/grounding/rules.hpp"
#include "tta/harness/harness.hpp"
#include "tta/util.hpp"

namespace {

using namespace tta;

std::filesystem::path config_dir(const std::filesystem::path& config) {
  return std::filesystem::absolute(config).parent_path();
}

int do_run(const std::filesystem::path& config_file, const std::string& out_dir, const std::vector<std::uint64_t>& seeds) {
  auto j = harness::load_config_file(config_file);
  if (!seeds.empty()) j["seeds"] = seeds;
  auto config = harness::RunConfig::from_json(j, config_dir(config_file));
  if (!out_dir.empty()) config.output_dir = out_dir;
  const auto report = harness::cmd_run(config);
  std::cout << "episodes=" << report.episodes << " successes=" << report.successes
            << " success_rate=" << report.success_rate << " mean_steps=" << report.mean_steps << "\n"
            << "report: " << (config.output_dir / "report.json").string() << "\n";
  return 0;
}

int do_explore(const std::filesystem::path& config_file, std::optional<int> n, const std::string& out) {
  auto j = harness::load_config_file(config_file);
  if (n) j["n"] = *n;
  auto config = harness::ExploreConfig::from_json(j, config_dir(config_file));
  if (!out.empty()) config.output = out;
  const auto summary = harness::cmd_explore(config);
  for (const auto& w : summary.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "raw=" << summary.raw.rules.size() << " filtered=" << summary.filtered.rules.size() << "\n";
  return 0;
}

int do_bench(const std::filesystem::path& config_file, const std::vector<int>& steps, const std::string& json_out) {
  auto j = harness::load_config_file(config_file);
  if (!steps.empty()) j["steps"] = steps;
  const auto config = harness::BenchConfig::from_json(j, config_dir(config_file));
  const auto table = harness::cmd_bench_latency(config);
  std::cout << table.to_text();
  if (!json_out.empty()) write_file(json_out, table.to_json().dump(2) + "\n");
  return 0;
}

int do_ablate(const std::filesystem::path& config_file, std::optional<int> max_cells, const std::string& out) {
  auto j = harness::load_config_file(config_file);
  if (!out.empty()) j["output"] = std::filesystem::absolute(out).string();
  const auto config = harness::AblationConfig::from_json(j, config_dir(config_file));
  const auto outcome = harness::cmd_ablate(config, max_cells, &std::cerr);
  std::cout << "cells=" << outcome.rows.size() << "/" << outcome.total << " computed=" << outcome.computed
            << " reused=" << outcome.reused << (outcome.complete ? " complete" : " incomplete") << "\n"
            << "csv: " << config.output.string() << "\n";
  return 0;
}

int do_validate(const std::filesystem::path& path, bool require_filtered) {
  const auto rs = grounding::load_rules(path);
  if (require_filtered && !rs.provenance.filtered) throw RuleSetError(path.string() + " is not a filtered rule set");
  std::cout << "ok env=" << rs.env << " rules=" << rs.rules.size() << " filtered=" << (rs.provenance.filtered ? 1 : 0)
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Test-time grounding and adaptation for LLM agents"};
  app.require_subcommand(1);

  std::filesystem::path config;
  std::string out;
  std::vector<std::uint64_t> seeds;
  auto* run = app.add_subcommand("run", "Evaluate a policy on environment tasks");
  run->add_option("-c,--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--out", out, "Output directory (overrides output_dir)");
  run->add_option("--seeds", seeds, "Seeds (override the config)");

  std::optional<int> n;
  auto* explore = app.add_subcommand("explore", "Explore an environment and extract dynamics rules");
  explore->add_option("-c,--config", config, "Explore config (JSON)")->required()->check(CLI::ExistingFile);
  explore->add_option("-n", n, "Number of personas or goals (one episode each)");
  explore->add_option("-o,--out", out, "Filtered rules path; raw rules go next to it as *.raw.json");

  std::vector<int> steps;
  std::string json_out;
  auto* bench = app.add_subcommand("bench-latency", "Measure adaptation overhead per model prediction");
  bench->add_option("-c,--config", config, "Bench config (JSON)")->required()->check(CLI::ExistingFile);
  bench->add_option("--steps", steps, "Update-step counts to time");
  bench->add_option("--json", json_out, "Also write the table as JSON");

  std::optional<int> max_cells;
  auto* ablate = app.add_subcommand("ablate", "Sweep an ablation grid into a CSV (resumable)");
  ablate->add_option("-c,--config", config, "Ablation config (JSON)")->required()->check(CLI::ExistingFile);
  ablate->add_option("--max-cells", max_cells, "Stop after computing this many new cells");
  ablate->add_option("-o,--out", out, "CSV path (overrides output)");

  std::filesystem::path rules_path;
  bool require_filtered = false;
  auto* validate = app.add_subcommand("validate-rules", "Check a rule set file");
  validate->add_option("path", rules_path, "RuleSet JSON")->required()->check(CLI::ExistingFile);
  validate->add_flag("--filtered", require_filtered, "Require a filtered rule set");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return do_run(config, out, seeds);
    if (*explore) return do_explore(config, n, out);
    if (*bench) return do_bench(config, steps, json_out);
    if (*ablate) return do_ablate(config, max_cells, out);
    if (*validate) return do_validate(rules_path, require_filtered);
  } catch (const tta::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
