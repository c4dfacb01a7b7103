#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>

#include "test_support.hpp"
#include "tta/errors.hpp"
#include "tta/harness/harness.hpp"

namespace {

using namespace tta;
using json = nlohmann::json;

TEST(Config, InterpolatesEnvironmentVariables) {
  ::setenv("TTA_UNIT_ENDPOINT", "http://host:1", 1);
  const auto j = harness::interpolate_env({{"a", "${TTA_UNIT_ENDPOINT}/v1"}, {"b", {1, "x${TTA_UNIT_ENDPOINT}"}}, {"c", 3}});
  EXPECT_EQ(j["a"], "http://host:1/v1");
  EXPECT_EQ(j["b"][1], "xhttp://host:1");
  EXPECT_EQ(j["c"], 3);
  ::unsetenv("TTA_UNIT_ENDPOINT");
  EXPECT_THROW(harness::interpolate_env({{"a", "${TTA_UNIT_ENDPOINT}"}}), ConfigError);
}

TEST(Config, SelectTasks) {
  const auto web = env::make_builtin_environment("web");
  EXPECT_EQ(harness::select_tasks(*web, harness::TaskFilter::from_json({{"category", "surprise"}})).size(), 10u);
  const auto picked = harness::select_tasks(*web, harness::TaskFilter::from_json(json::array({"web-03", "web-01"})));
  ASSERT_EQ(picked.size(), 2u);
  EXPECT_EQ(picked[0].id, "web-01");  // fixture order
  EXPECT_EQ(harness::select_tasks(*web, harness::TaskFilter::from_json("^web-1[5-7]$")).size(), 3u);
  EXPECT_THROW(harness::select_tasks(*web, harness::TaskFilter::from_json("^nothing$")), ConfigError);
  EXPECT_THROW(harness::select_tasks(*web, harness::TaskFilter::from_json(json::array({"web-99"}))), UnknownTaskError);
}

TEST(Config, RunConfigParsing) {
  const auto dir = tta::testing::scratch_dir("runcfg");
  write_file(dir / "p.json", R"([{"match": "", "response": "x"}])");
  const json j = {{"env", "fs"},
                  {"backend", {{"kind", "scripted"}, {"script", "p.json"}}},
                  {"adaptation", {{"learning_rate", 0.5}}},
                  {"seeds", {1, 2}},
                  {"output_dir", "out"},
                  {"context_mode", "last_obs"}};
  const auto c = harness::RunConfig::from_json(j, dir);
  EXPECT_EQ(c.backend.script_path, dir / "p.json");
  EXPECT_EQ(c.output_dir, dir / "out");
  EXPECT_TRUE(c.default_reset_policy);
  EXPECT_EQ(c.adaptation->learning_rate, 0.5);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_EQ(c.context_mode, agent::ContextMode::LastObs);

  auto bad = j;
  bad["seeds"] = json::array();
  EXPECT_THROW(harness::RunConfig::from_json(bad, dir), ConfigError);
  bad = j;
  bad["rules"] = "missing.json";
  EXPECT_THROW(harness::RunConfig::from_json(bad, dir), ConfigError);
  bad = j;
  bad.erase("backend");
  EXPECT_THROW(harness::RunConfig::from_json(bad, dir), ConfigError);
}

TEST(Metrics, AggregateAndParseBack) {
  std::vector<agent::EpisodeResult> eps(4);
  for (int i = 0; i < 4; ++i) {
    eps[i].env_id = "web";
    eps[i].task_id = "t" + std::to_string(i % 2);
    eps[i].seed = static_cast<std::uint64_t>(i / 2);
    eps[i].success = i != 1;
    eps[i].steps = i + 1;
  }
  const auto m = harness::aggregate("web", "m", eps);
  EXPECT_EQ(m.episodes, 4);
  EXPECT_EQ(m.successes, 3);
  EXPECT_DOUBLE_EQ(m.success_rate, 0.75);
  EXPECT_DOUBLE_EQ(m.mean_steps, 2.5);
  ASSERT_EQ(m.per_seed.size(), 2u);
  EXPECT_DOUBLE_EQ(m.per_seed[0].success_rate, 0.5);
  std::string log;
  for (const auto& e : eps) log += agent::trajectory_jsonl(e);
  EXPECT_DOUBLE_EQ(harness::success_rate_from_jsonl(log), 0.75);
  EXPECT_THROW(harness::success_rate_from_jsonl(""), FormatError);
}

TEST(Explore, RawPathSitsNextToFilteredPath) {
  EXPECT_EQ(harness::raw_rules_path("out/rules.json"), std::filesystem::path("out/rules.raw.json"));
  EXPECT_EQ(harness::raw_rules_path("rules"), std::filesystem::path("rules.raw.json"));
}

TEST(Bench, NeedsLocalBackend) {
  harness::BenchConfig c;
  c.backend.kind = llm::BackendKind::Scripted;
  c.backend.script_path = data_dir() / "scripted" / "web_policy.json";
  EXPECT_THROW(harness::cmd_bench_latency(c), UnsupportedOperationError);
  EXPECT_THROW(harness::BenchConfig::from_json({{"backend", {{"kind", "local"}}}, {"steps", json::array()}}), ConfigError);
}

json ablation_json(const std::filesystem::path& dir) {
  const auto policy = (data_dir() / "scripted" / "web_policy.json").string();
  return {{"models", {{{"name", "a"}, {"backend", {{"kind", "scripted"}, {"script", policy}}}},
                      {{"name", "b"}, {"backend", {{"kind", "scripted"}, {"script", policy}}}}}},
          {"tasks", {"web-01", "web-11"}},
          {"learning_rates", {0.1, 1.0}},
          {"update_steps", {0}},
          {"output", (dir / "grid.csv").string()}};
}

TEST(Ablation, GridOrderAndCsv) {
  const auto dir = tta::testing::scratch_dir("ablate_grid");
  const auto c = harness::AblationConfig::from_json(ablation_json(dir), dir);
  const auto grid = harness::ablation_grid(c);
  ASSERT_EQ(grid.size(), 4u);
  EXPECT_EQ(grid[0].model, "a");
  EXPECT_EQ(grid[1].learning_rate, 1.0);
  EXPECT_EQ(grid[2].model, "b");
  harness::AblationRow row{grid[1], 2, 1, 0.5, 3.0};
  EXPECT_EQ(harness::ablation_csv({row}),
            "env,model,learning_rate,update_steps,reset_policy,rules,episodes,successes,success_rate,mean_steps\n"
            "web,a,1,0,default,none,2,1,0.5000,3.000\n");
}

TEST(Ablation, ResumesFromCheckpoint) {
  const auto dir = tta::testing::scratch_dir("ablate_resume");
  const auto c = harness::AblationConfig::from_json(ablation_json(dir), dir);
  const auto first = harness::cmd_ablate(c, 3);
  EXPECT_EQ(first.computed, 3);
  EXPECT_FALSE(first.complete);
  // A half-written line from an interrupted run is ignored.
  std::ofstream(dir / "grid.csv.ckpt.jsonl", std::ios::app) << "{\"key\":\"web|b";
  const auto second = harness::cmd_ablate(c);
  EXPECT_EQ(second.reused, 3);
  EXPECT_EQ(second.computed, 1);
  EXPECT_TRUE(second.complete);
  const auto csv = read_file(dir / "grid.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_NE(csv.find("web,a,0.1,0,default,none,2,1,0.5000,"), std::string::npos);
}

TEST(Ablation, RejectsBadAxes) {
  const auto dir = tta::testing::scratch_dir("ablate_bad");
  auto j = ablation_json(dir);
  j["learning_rates"] = {0.0};
  EXPECT_THROW(harness::AblationConfig::from_json(j, dir), ConfigError);
  j = ablation_json(dir);
  j["models"][1]["name"] = "a";
  EXPECT_THROW(harness::AblationConfig::from_json(j, dir), ConfigError);
  j = ablation_json(dir);
  j["rules"] = {{{"name", "filtered"}, {"paths", {{"fs", "x.json"}}}}};
  EXPECT_THROW(harness::AblationConfig::from_json(j, dir), ConfigError);
}

TEST(Run, WritesTrajectoriesAndReport) {
  const auto dir = tta::testing::scratch_dir("run");
  harness::RunConfig c;
  c.env = "web";
  c.tasks = harness::TaskFilter::from_json(json::array({"web-09", "web-10"}));
  c.backend.kind = llm::BackendKind::Scripted;
  c.backend.script_path = data_dir() / "scripted" / "web_policy.json";
  c.seeds = {0, 1};
  c.concurrency = 2;
  c.output_dir = dir;
  const auto report = harness::cmd_run(c);
  EXPECT_EQ(report.episodes, 4);
  EXPECT_EQ(report.successes, 4);
  const auto written = json::parse(read_file(dir / "report.json"));
  EXPECT_EQ(written["success_rate"], 1.0);
  EXPECT_DOUBLE_EQ(harness::success_rate_from_jsonl(read_file(dir / "trajectories.jsonl")), 1.0);
}

}  // namespace
