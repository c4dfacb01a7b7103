#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <sstream>

#include "test_support.hpp"
#include "tta/agent/agent.hpp"
#include "tta/errors.hpp"
#include "tta/llm/local.hpp"
#include "tta/llm/scripted.hpp"

namespace {

using namespace tta;
using agent::HistoryItem;
using json = nlohmann::json;
using Kind = HistoryItem::Kind;

// Accepts prompts up to a character budget.
struct BudgetBackend : llm::Backend {
  std::size_t budget;
  explicit BudgetBackend(std::size_t b) : budget(b) {}
  llm::BackendKind kind() const override { return llm::BackendKind::Scripted; }
  std::string model_id() const override { return "budget"; }
  std::string complete(const std::vector<llm::ChatMessage>&, const llm::CompletionOverrides&) override { return ""; }
  bool fits(const std::vector<llm::ChatMessage>& m, const llm::CompletionOverrides&) const override {
    return llm::render_transcript(m).size() <= budget;
  }
};

agent::ContextOptions web_options() { return {agent::ContextMode::LastObs, agent::PromptProfile::Verbose, env::EnvKind::Web, ""}; }

TEST(Context, LastObsLayout) {
  const env::Observation obs{"[1] heading 'x'", "http://a/", {}};
  auto ctx = agent::build_context("Find it", &obs, {{Kind::Action, "click [1]"}, {Kind::Action, "scroll [down]"}}, nullptr,
                                  web_options());
  ASSERT_EQ(ctx.messages.size(), 2u);
  EXPECT_EQ(ctx.messages[1].content,
            "OBJECTIVE: Find it\nOBSERVATION:\n[1] heading 'x'\nURL: http://a/\nPREVIOUS ACTIONS:\n1. click [1]\n2. scroll [down]");
  ctx = agent::build_context("Find it", &obs, {}, nullptr, web_options());
  EXPECT_NE(ctx.messages[1].content.find("PREVIOUS ACTIONS:\nNone"), std::string::npos);
}

TEST(Context, RulesGoIntoTheSystemPrompt) {
  const env::Observation obs{"o", "", {}};
  grounding::RuleSet rs{"web", {}, {{"s", "click [3] where [3] is Go", "opens a modal"}}};
  const auto with = agent::build_context("p", &obs, {}, &rs, web_options());
  const auto without = agent::build_context("p", &obs, {}, nullptr, web_options());
  EXPECT_NE(with.messages[0].content.find(R"({"initial_state":"s","action":"click [3] where [3] is Go","environmental_dynamics":"opens a modal"})"),
            std::string::npos);
  EXPECT_EQ(with.messages[0].content.rfind(without.messages[0].content, 0), 0u);
  grounding::RuleSet empty{"web", {}, {}};
  EXPECT_EQ(agent::build_context("p", &obs, {}, &empty, web_options()).messages[0].content, without.messages[0].content);
}

TEST(Context, FullInterleavedTurns) {
  agent::ContextOptions o{agent::ContextMode::FullInterleaved, agent::PromptProfile::Verbose, env::EnvKind::FunctionCalling, "{\"name\":\"ls\"}"};
  const auto ctx = agent::build_context(
      "q1", nullptr, {{Kind::UserQuery, "q1"}, {Kind::Action, "```\nls()\n```"}, {Kind::Observation, "{}"}}, nullptr, o);
  ASSERT_EQ(ctx.messages.size(), 4u);
  EXPECT_NE(ctx.messages[0].content.find("{\"name\":\"ls\"}"), std::string::npos);
  EXPECT_EQ(ctx.messages[1].content, "USER QUERY:\nq1");
  EXPECT_EQ(ctx.messages[2].role, llm::Role::Assistant);
  EXPECT_EQ(ctx.messages[3].content, "ENVIRONMENT:\n{}");
  EXPECT_EQ(ctx.observation, "{}");
}

TEST(Context, TruncationDropsOldestActionsFirst) {
  const env::Observation obs{"current page", "http://a/", {}};
  std::vector<HistoryItem> history;
  for (int i = 0; i < 40; ++i) history.push_back({Kind::Action, "click [" + std::to_string(i) + "]"});
  const auto full = agent::build_context("p", &obs, history, nullptr, web_options());
  BudgetBackend b(llm::render_transcript(full.messages).size() - 60);
  const auto ctx = agent::build_context("p", &obs, history, nullptr, web_options(), &b);
  EXPECT_TRUE(ctx.truncated);
  EXPECT_GT(ctx.dropped, 0u);
  EXPECT_EQ(ctx.history.back().text, "click [39]");
  EXPECT_NE(ctx.history.front().text, "click [0]");
  EXPECT_TRUE(b.fits(ctx.messages, {}));
  EXPECT_NE(ctx.messages[1].content.find("current page"), std::string::npos);
}

TEST(Context, CapacityErrorWhenEssentialsDoNotFit) {
  const env::Observation obs{std::string(500, 'x'), "", {}};
  BudgetBackend b(100);
  EXPECT_THROW(agent::build_context("p", &obs, {{Kind::Action, "a"}}, nullptr, web_options(), &b), CapacityError);
}

TEST(Parsing, LastFencedBlock) {
  EXPECT_EQ(agent::last_fenced_block("think\n```\nclick [1]\n```\nthen ```\nclick [2]\n```"), "click [2]");
  EXPECT_EQ(agent::last_fenced_block("```python\nls()\n```"), "ls()");
  EXPECT_EQ(agent::last_fenced_block("```\nclick [1]\n``` and ```unclosed"), "click [1]");
  EXPECT_FALSE(agent::last_fenced_block("click [1]").has_value());
}

TEST(Parsing, UnfencedTextIsInvalidNotAnException) {
  const auto a = agent::parse_action("I would click the button", env::EnvKind::Web);
  EXPECT_TRUE(a.is_invalid());
  EXPECT_EQ(a.raw, "I would click the button");
  EXPECT_TRUE(agent::parse_action("```\nstop [42]\n```", env::EnvKind::FunctionCalling).is_stop());
}

TEST(Defaults, PerEnvironmentKind) {
  EXPECT_EQ(agent::default_context_mode(env::EnvKind::Web), agent::ContextMode::LastObs);
  EXPECT_EQ(agent::default_context_mode(env::EnvKind::FunctionCalling), agent::ContextMode::FullInterleaved);
  EXPECT_EQ(agent::default_reset_policy(env::EnvKind::Web), adapt::ResetPolicy::PerEpisode);
  EXPECT_EQ(agent::default_reset_policy(env::EnvKind::FunctionCalling), adapt::ResetPolicy::PerTurn);
  EXPECT_EQ(agent::context_mode_from_string("full_interleaved"), agent::ContextMode::FullInterleaved);
  EXPECT_THROW(agent::prompt_profile_from_string("loud"), ConfigError);
}

std::unique_ptr<llm::ScriptedBackend> script(json entries) {
  entries.push_back({{"match", ""}, {"response", "```\nstop [gave up]\n```"}});
  return llm::ScriptedBackend::from_json(entries);
}

TEST(Episode, ScriptedWebEpisodeSucceeds) {
  auto env = env::make_builtin_environment("web");
  auto b = script(json::array({{{"match", "'Flights to Paris on May 2'[\\s\\S]*\\[30\\] StaticText '\\w+ [\\d:]+ (\\$[\\d.]+)'"},
                                {"response", "```\nstop [$1]\n```"}},
                               {{"match", "dialog 'Select travel date'"}, {"response", "```\nclick [22]\n```"}},
                               {{"match", "OBJECTIVE"}, {"response", "```\ntype [2] [Paris] [1]\n```"}}}));
  agent::EpisodeOptions o;
  const auto r = agent::run_episode(*env, env->task("web-11"), *b, o);
  EXPECT_TRUE(r.success);
  EXPECT_TRUE(r.terminated);
  EXPECT_EQ(r.steps, 3);
  EXPECT_EQ(r.answer, "$279.49");
  EXPECT_EQ(r.records[1].action, "click [22]");
}

TEST(Episode, BudgetEndsEpisodeWithoutTermination) {
  auto env = env::make_builtin_environment("web");
  auto b = script(json::array({{{"match", "OBJECTIVE"}, {"response", "```\nscroll [down]\n```"}}}));
  agent::EpisodeOptions o;
  o.max_steps = 4;
  const auto r = agent::run_episode(*env, env->task("web-01"), *b, o);
  EXPECT_FALSE(r.terminated);
  EXPECT_FALSE(r.success);
  EXPECT_EQ(r.steps, 4);
}

TEST(Episode, BackendFailureBecomesErrorTag) {
  auto env = env::make_builtin_environment("web");
  auto b = llm::ScriptedBackend::from_json(json::array({{{"match", ""}, {"response", nullptr}}}));
  const auto r = agent::run_episode(*env, env->task("web-01"), *b, {});
  ASSERT_TRUE(r.error.has_value());
  EXPECT_EQ(r.error->rfind("scripted_policy:", 0), 0u);
  EXPECT_FALSE(r.success);
}

TEST(Episode, AdaptationNeedsLocalBackend) {
  auto env = env::make_builtin_environment("web");
  auto b = script(json::array());
  agent::EpisodeOptions o;
  o.adaptation = adapt::AdaptationConfig{};
  EXPECT_THROW(agent::run_episode(*env, env->task("web-01"), *b, o), UnsupportedOperationError);
}

TEST(Episode, TrajectoryJsonlSchema) {
  auto env = env::make_builtin_environment("web");
  auto b = script(json::array({{{"match", "OBJECTIVE"}, {"response", "```\nclick [4]\n```"}}}));
  agent::EpisodeOptions o;
  o.max_steps = 2;
  o.seed = 5;
  const auto r = agent::run_episode(*env, env->task("web-10"), *b, o);
  std::istringstream in(agent::trajectory_jsonl(r));
  std::vector<json> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(json::parse(l));
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0]["type"], "step");
  EXPECT_EQ(lines[0]["schema"], agent::kTrajectorySchemaVersion);
  EXPECT_EQ(lines[0]["seed"], 5);
  EXPECT_EQ(lines[0]["obs_hash"].get<std::string>().size(), 16u);
  EXPECT_FALSE(lines[0].contains("wall_ms"));
  EXPECT_FALSE(lines[0].contains("update"));
  EXPECT_EQ(lines[2]["type"], "end");
  EXPECT_EQ(lines[2]["steps"], 2);
  EXPECT_TRUE(json::parse(agent::trajectory_jsonl(r, true).substr(0, agent::trajectory_jsonl(r, true).find('\n')))
                  .contains("wall_ms"));
}

// Records the delta each adapted call starts from and answers from a script.
struct RecordingAdaptiveBackend : llm::Backend {
  std::vector<std::string> replies;
  std::size_t next = 0;
  std::vector<bool> started_from_zero;
  llm::BackendKind kind() const override { return llm::BackendKind::Local; }
  std::string model_id() const override { return "recording"; }
  std::size_t adaptation_dim() const override { return 3; }
  std::string complete(const std::vector<llm::ChatMessage>&, const llm::CompletionOverrides&) override {
    return replies.at(next++);
  }
  llm::AdaptedCompletion adapt_and_complete(const std::vector<llm::ChatMessage>& m, const adapt::AdaptationVector& delta,
                                            const adapt::AdaptationConfig& cfg,
                                            const llm::CompletionOverrides& o) override {
    started_from_zero.push_back(delta.is_zero());
    auto moved = delta;
    moved.delta[0] += 1.0;
    moved.steps_applied += static_cast<std::size_t>(cfg.update_steps);
    return {complete(m, o), moved, {1.0, 0.5, 0.1, cfg.update_steps}};
  }
};

TEST(Episode, ResetPolicyControlsDeltaAcrossTurns) {
  auto env = env::make_builtin_environment("fs");
  auto run = [&](adapt::ResetPolicy p) {
    RecordingAdaptiveBackend b;
    b.replies = {"```\nmkdir(dir_name=\"drafts\")\n```", "```\nstop []\n```", "```\ncd(folder=\"drafts\")\n```",
                 "```\ntouch(file_name=\"idea.md\")\n```", "```\nstop []\n```"};
    agent::EpisodeOptions o;
    o.mode = agent::ContextMode::FullInterleaved;
    o.adaptation = adapt::AdaptationConfig{0.5, 1, p};
    const auto r = agent::run_episode(*env, env->task("fs-08"), b, o);
    EXPECT_TRUE(r.success);
    EXPECT_EQ(r.records.at(0).update->steps, 1);
    return b.started_from_zero;
  };
  EXPECT_EQ(run(adapt::ResetPolicy::PerTurn), (std::vector<bool>{true, false, true, false, false}));
  EXPECT_EQ(run(adapt::ResetPolicy::PerEpisode), (std::vector<bool>{true, false, false, false, false}));
}

}  // namespace
