#include <gtest/gtest.h>

#include <algorithm>
#include <nlohmann/json.hpp>
#include <sstream>

#include "test_support.hpp"
#include "tta/agent/agent.hpp"
#include "tta/envs/fs_env.hpp"
#include "tta/errors.hpp"

namespace {

using namespace tta;
using json = nlohmann::json;

env::Action act(const std::string& body, env::EnvKind kind) { return {body, env::parse_action_body(body, kind)}; }

bool has_line(const env::Observation& obs, const std::string& line) {
  std::istringstream in(obs.text);
  std::string l;
  while (std::getline(in, l)) {
    if (l == line) return true;
  }
  return false;
}

class Web : public ::testing::Test {
 protected:
  void SetUp() override { env_ = env::make_builtin_environment("web"); }
  env::StepResult step(const std::string& body) { return env_->step(act(body, env::EnvKind::Web)); }
  std::unique_ptr<env::Environment> env_;
};

TEST_F(Web, HomePage) {
  const auto obs = env_->reset("web-11", 0);
  EXPECT_EQ(obs.url, "http://travel-example.com/");
  EXPECT_TRUE(has_line(obs, "[2] textbox 'dest_field'"));
  EXPECT_TRUE(has_line(obs, "[3] button 'Go'"));
}

TEST_F(Web, GoOpensDateModalInsteadOfResults) {
  env_->reset("web-11", 0);
  step("type [2] [Paris] [0]");
  const auto r = step("click [3]");
  EXPECT_EQ(r.outcome, env::StepOutcome::Ok);
  EXPECT_EQ(r.observation.url, "http://travel-example.com/");
  EXPECT_TRUE(has_line(r.observation, "[20] dialog 'Select travel date'"));
  EXPECT_TRUE(has_line(r.observation, "[22] button 'May 2'"));
}

TEST_F(Web, TypeWithEnterAlsoOpensModal) {
  env_->reset("web-11", 0);
  const auto r = step("type [2] [Paris] [1]");
  EXPECT_TRUE(has_line(r.observation, "[20] dialog 'Select travel date'"));
}

TEST_F(Web, ModalBlocksOtherElements) {
  env_->reset("web-11", 0);
  step("click [3]");
  const auto r = step("click [4]");
  EXPECT_EQ(r.outcome, env::StepOutcome::InvalidAction);
  EXPECT_NE(r.observation.text.find("blocked by the open dialog"), std::string::npos);
  EXPECT_EQ(r.observation.url, "http://travel-example.com/");
}

TEST_F(Web, DateWithoutDestinationShowsNotice) {
  env_->reset("web-11", 0);
  step("click [3]");
  const auto r = step("click [21]");
  EXPECT_TRUE(has_line(r.observation, "[7] StaticText 'Please enter a destination before choosing a date.'"));
  EXPECT_FALSE(has_line(r.observation, "[20] dialog 'Select travel date'"));
}

TEST_F(Web, ResultsListCheapestFirst) {
  const auto fixture = json::parse(read_file(env::builtin_fixture_path("web")));
  for (const auto& [dest, flights] : fixture.at("flights").items()) {
    env_->reset("web-11", 0);
    step("type [2] [" + dest + "] [0]");
    step("click [3]");
    const auto r = step("click [23]");
    EXPECT_EQ(r.observation.url, "http://travel-example.com/results?dest=" + dest + "&date=May+3");
    // Oracle: lowest price in the fixture, compared numerically.
    const auto best = *std::min_element(flights.begin(), flights.end(), [](const json& a, const json& b) {
      return std::stod(a["price"].get<std::string>().substr(1)) < std::stod(b["price"].get<std::string>().substr(1));
    });
    EXPECT_TRUE(has_line(r.observation, "[30] StaticText '" + best["code"].get<std::string>() + " " +
                                            best["time"].get<std::string>() + " " + best["price"].get<std::string>() + "'"))
        << dest;
  }
}

TEST_F(Web, UnknownDestinationHasNoFlights) {
  env_->reset("web-11", 0);
  step("type [2] [Atlantis] [1]");
  const auto r = step("click [21]");
  EXPECT_TRUE(has_line(r.observation, "[30] StaticText 'No flights found'"));
}

TEST_F(Web, BookingCompletesTask) {
  const auto& task = env_->task("web-20");
  env_->reset(task, 0);
  env::Trajectory traj;
  for (const std::string a : {"type [2] [Paris] [1]", "click [25]", "click [40]", "stop []"}) {
    traj.actions.push_back(act(a, env::EnvKind::Web));
    const auto r = env_->step(traj.actions.back());
    if (r.outcome == env::StepOutcome::Terminal) traj.terminated = true;
  }
  traj.answer = "";
  traj.final_state = env_->snapshot();
  EXPECT_TRUE(env_->evaluate(task, traj));
  EXPECT_FALSE(env_->episode_active());
}

TEST_F(Web, AnswerChecksAreExact) {
  const auto& task = env_->task("web-11");
  env_->reset(task, 0);
  env_->step(act("stop [$279.49]", env::EnvKind::Web));
  env::Trajectory t{{}, true, "$279.49", env_->snapshot()};
  EXPECT_TRUE(env_->evaluate(task, t));
  t.answer = "$312.00";
  EXPECT_FALSE(env_->evaluate(task, t));
}

TEST_F(Web, DealsScrollAndHistory) {
  env_->reset("web-01", 0);
  step("click [4]");
  const auto second = step("scroll [down]");
  EXPECT_TRUE(has_line(second.observation, "[9] StaticText 'Showing deals 5-8 of 10'"));
  const auto back = step("go_back");
  EXPECT_EQ(back.observation.url, "http://travel-example.com/");
  EXPECT_EQ(step("go_back").outcome, env::StepOutcome::InvalidAction);
}

TEST_F(Web, MissingElementIsInvalid) {
  env_->reset("web-01", 0);
  const auto r = step("click [99]");
  EXPECT_EQ(r.outcome, env::StepOutcome::InvalidAction);
  EXPECT_NE(r.observation.text.find("no element with id [99]"), std::string::npos);
}

TEST_F(Web, Lifecycle) {
  EXPECT_THROW(step("click [3]"), LifecycleError);
  env_->reset("web-01", 0);
  EXPECT_EQ(step("stop [x]").outcome, env::StepOutcome::Terminal);
  EXPECT_THROW(step("click [3]"), LifecycleError);
  EXPECT_THROW(env_->reset("web-99", 0), UnknownTaskError);
}

TEST_F(Web, FreshCopiesAreIndependent) {
  auto other = env_->fresh();
  env_->reset("web-01", 0);
  step("click [4]");
  const auto obs = other->reset("web-01", 0);
  EXPECT_EQ(obs.url, "http://travel-example.com/");
  EXPECT_EQ(env_->snapshot()["page"], "deals");
}

class Fs : public ::testing::Test {
 protected:
  void SetUp() override { env_ = env::make_builtin_environment("fs"); }
  json call(const std::string& body) {
    last_ = env_->step(act(body, env::EnvKind::FunctionCalling));
    return json::parse(last_.observation.text, nullptr, false);
  }
  std::unique_ptr<env::Environment> env_;
  env::StepResult last_;
};

TEST_F(Fs, ResetShowsRootListing) {
  const auto obs = env_->reset("fs-01", 0);
  const auto j = json::parse(obs.text);
  const auto entries = j.at("current_directory_content").get<std::vector<std::string>>();
  EXPECT_TRUE(std::is_sorted(entries.begin(), entries.end()));
  EXPECT_EQ(std::count(entries.begin(), entries.end(), ".hidden_config"), 0);
}

TEST_F(Fs, RmOnNonEmptyDirNeedsImmediateRepeat) {
  env_->reset("fs-11", 0);
  EXPECT_NE(call("rm(file_name=\"old_logs\")")["result"].get<std::string>().find("pending confirmation"),
            std::string::npos);
  EXPECT_TRUE(env_->snapshot()["tree"].contains("old_logs"));
  call("ls()");  // any other call cancels the pending removal
  call("rm(file_name=\"old_logs\")");
  EXPECT_TRUE(env_->snapshot()["tree"].contains("old_logs"));
  call("rm(file_name=\"old_logs\")");
  EXPECT_FALSE(env_->snapshot()["tree"].contains("old_logs"));
}

TEST_F(Fs, RmOnFileOrEmptyDirIsImmediate) {
  env_->reset("fs-06", 0);
  call("rm(file_name=\"todo.md\")");
  call("rm(file_name=\"empty_dir\")");
  const auto tree = env_->snapshot()["tree"];
  EXPECT_FALSE(tree.contains("todo.md"));
  EXPECT_FALSE(tree.contains("empty_dir"));
}

TEST_F(Fs, WcAgreesWithDirectCounts) {
  const auto fixture = json::parse(read_file(env::builtin_fixture_path("fs")));
  for (const std::string name : {"notes.txt", "todo.md"}) {
    const std::string text = fixture["fixtures"]["default"][name].get<std::string>();
    std::istringstream words(text);
    std::size_t w = 0;
    for (std::string tok; words >> tok;) ++w;
    env_->reset("fs-01", 0);
    EXPECT_EQ(call("wc(file_name=\"" + name + "\", mode=\"l\")")["count"], std::count(text.begin(), text.end(), '\n'));
    EXPECT_EQ(call("wc(file_name=\"" + name + "\", mode=\"w\")")["count"], w);
    EXPECT_EQ(call("wc(file_name=\"" + name + "\", mode=\"c\")")["count"], text.size());
  }
}

TEST_F(Fs, NavigationAndErrors) {
  env_->reset("fs-09", 0);
  EXPECT_EQ(call("cd(folder=\"projects/alpha\")")["current_working_directory"], "/workspace/projects/alpha");
  EXPECT_EQ(call("pwd()")["current_working_directory"], "/workspace/projects/alpha");
  call("cd(folder=\"..\")");
  call("cd(folder=\"..\")");
  EXPECT_TRUE(call("cd(folder=\"..\")").contains("error"));
  EXPECT_TRUE(call("cat(file_name=\"nothere\")").contains("error"));
  EXPECT_TRUE(call("mkdir(dir_name=\"docs\")").contains("error"));
  EXPECT_EQ(last_.outcome, env::StepOutcome::Ok);
  call("frobnicate()");
  EXPECT_EQ(last_.outcome, env::StepOutcome::InvalidAction);
}

TEST_F(Fs, EchoAndCat) {
  env_->reset("fs-05", 0);
  EXPECT_EQ(call("echo(content=\"hi\")")["terminal_output"], "hi");
  EXPECT_FALSE(env_->snapshot()["tree"].contains("hi"));
  call("echo(content=\"hello world\", file_name=\"greeting.txt\")");
  EXPECT_EQ(call("cat(file_name=\"greeting.txt\")")["file_content"], "hello world");
}

TEST_F(Fs, MultiTurnTaskAdvancesOnStop) {
  const auto& task = env_->task("fs-08");
  env_->reset(task, 0);
  call("mkdir(dir_name=\"drafts\")");
  call("stop []");
  ASSERT_TRUE(last_.next_user_query.has_value());
  EXPECT_EQ(*last_.next_user_query, task.turns[1]);
  EXPECT_EQ(last_.outcome, env::StepOutcome::Ok);
  call("cd(folder=\"drafts\")");
  call("touch(file_name=\"idea.md\")");
  call("stop []");
  EXPECT_EQ(last_.outcome, env::StepOutcome::Terminal);
  env::Trajectory t{{}, true, "", env_->snapshot()};
  EXPECT_TRUE(env_->evaluate(task, t));
}

TEST_F(Fs, ToolDocsAreJsonLines) {
  std::istringstream in(env_->render_tools());
  int n = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    EXPECT_TRUE(json::parse(line).contains("name"));
    ++n;
  }
  EXPECT_GE(n, 8);
}

TEST(Fixtures, BundledTaskCounts) {
  for (const std::string id : {"web", "fs"}) {
    const auto e = env::make_builtin_environment(id);
    EXPECT_EQ(e->tasks().size(), 20u);
    EXPECT_EQ(std::count_if(e->tasks().begin(), e->tasks().end(), [](const auto& t) { return t.category == "surprise"; }),
              10);
  }
  EXPECT_THROW(env::make_builtin_environment("moon"), ConfigError);
}

TEST(Fixtures, BadFixtureIsFormatError) {
  const auto dir = tta::testing::scratch_dir("bad_fixture");
  write_file(dir / "a.json", R"({"format_version": 99, "kind": "web"})");
  EXPECT_THROW(env::load_environment(dir / "a.json"), FormatError);
  write_file(dir / "b.json", "{not json");
  EXPECT_THROW(env::load_environment(dir / "b.json"), FormatError);
}

TEST(ActionGrammar, WebForms) {
  using env::WebVerb;
  auto p = env::parse_action_body("type [2] [New York] [0]", env::EnvKind::Web);
  ASSERT_TRUE(std::holds_alternative<env::WebAction>(p));
  const auto& w = std::get<env::WebAction>(p);
  EXPECT_EQ(w.verb, WebVerb::Type);
  EXPECT_EQ(w.element_id, 2);
  EXPECT_EQ(w.text, "New York");
  EXPECT_FALSE(w.press_enter);
  EXPECT_TRUE(std::holds_alternative<env::StopAction>(env::parse_action_body("stop [$1.00]", env::EnvKind::Web)));
  EXPECT_TRUE(std::holds_alternative<env::InvalidAction>(env::parse_action_body("dance [3]", env::EnvKind::Web)));
  EXPECT_TRUE(std::holds_alternative<env::InvalidAction>(env::parse_action_body("click [x]", env::EnvKind::Web)));
}

TEST(ActionGrammar, CallForms) {
  auto p = env::parse_action_body(R"(wc(file_name="a b.txt", mode="w"))", env::EnvKind::FunctionCalling);
  ASSERT_TRUE(std::holds_alternative<env::FunctionCall>(p));
  const auto& c = std::get<env::FunctionCall>(p);
  EXPECT_EQ(c.name, "wc");
  EXPECT_EQ(*c.arg("file_name"), "a b.txt");
  EXPECT_EQ(*c.arg("mode"), "w");
  const auto q = env::parse_action_body("ls(a=True)", env::EnvKind::FunctionCalling);
  EXPECT_EQ(*std::get<env::FunctionCall>(q).arg("a"), true);
  EXPECT_TRUE(std::holds_alternative<env::InvalidAction>(env::parse_action_body("ls(", env::EnvKind::FunctionCalling)));
}

TEST(ActionGrammar, CanonicalFormIsAFixedPoint) {
  const std::vector<std::pair<std::string, env::EnvKind>> samples = {
      {"click [12]", env::EnvKind::Web},
      {"type [2] [Paris] [1]", env::EnvKind::Web},
      {"scroll [down]", env::EnvKind::Web},
      {"press [Control+a]", env::EnvKind::Web},
      {"goto [http://travel-example.com/help]", env::EnvKind::Web},
      {"go_back", env::EnvKind::Web},
      {"stop [24 hours]", env::EnvKind::Web},
      {R"(echo(content="a \"quoted\" word", file_name=None))", env::EnvKind::FunctionCalling},
      {"ls(a=False)", env::EnvKind::FunctionCalling},
      {"pwd()", env::EnvKind::FunctionCalling},
  };
  for (const auto& [body, kind] : samples) {
    const auto once = env::canonical(env::parse_action_body(body, kind));
    EXPECT_EQ(env::canonical(env::parse_action_body(once, kind)), once) << body;
  }
}

}  // namespace
