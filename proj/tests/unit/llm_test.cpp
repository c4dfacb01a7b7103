#include <gtest/gtest.h>

#include <cstdlib>
#include <nlohmann/json.hpp>

#include "test_support.hpp"
#include "tta/errors.hpp"
#include "tta/llm/local.hpp"
#include "tta/llm/remote.hpp"
#include "tta/llm/scripted.hpp"

namespace {

using namespace tta;
using llm::ChatMessage;
using llm::Role;
using json = nlohmann::json;

const std::vector<ChatMessage> kChat = {{Role::System, "sys"}, {Role::User, "hello"}};

TEST(Transcript, RendersRolesInOrder) {
  EXPECT_EQ(llm::render_transcript(kChat), "<|system|>\nsys\n<|user|>\nhello\n<|assistant|>\n");
  EXPECT_EQ(llm::role_from_string("assistant"), Role::Assistant);
  EXPECT_THROW(llm::role_from_string("robot"), FormatError);
}

std::unique_ptr<llm::ScriptedBackend> scripted(json entries) {
  return llm::ScriptedBackend::from_json({{"model_id", "s"}, {"entries", std::move(entries)}});
}

TEST(Scripted, FirstMatchingEntryAnswers) {
  auto b = scripted(json::array({{{"match", "hel+o"}, {"response", "first"}},
                                 {{"match", "hello"}, {"response", "second"}},
                                 {{"match", ""}, {"response", "fallback"}}}));
  EXPECT_EQ(b->complete(kChat), "first");
  EXPECT_EQ(b->complete({{Role::User, "bye"}}), "fallback");
  EXPECT_EQ(b->transcripts().size(), 2u);
  EXPECT_EQ(b->model_id(), "s");
}

TEST(Scripted, GroupsAndDollarEscapes) {
  auto b = scripted(json::array({{{"match", "price (\\d+)"}, {"response", "stop [$$$1] ($0)"}},
                                 {{"match", ""}, {"response", nullptr}}}));
  EXPECT_EQ(b->complete({{Role::User, "price 42"}}), "stop [$42] (price 42)");
}

TEST(Scripted, DotDoesNotCrossNewlines) {
  auto b = scripted(json::array({{{"match", "sys.*hello"}, {"response", "crossed"}},
                                 {{"match", ""}, {"response", "kept"}}}));
  EXPECT_EQ(b->complete(kChat), "kept");
}

TEST(Scripted, JsonEscapeOfGroups) {
  auto b = scripted(json::array({{{"match", "say (.+)"}, {"response", "{\"a\": \"$1\"}"}, {"escape", "json"}},
                                 {{"match", ""}, {"response", nullptr}}}));
  const auto out = b->complete({{Role::User, "say \"hi\" \\ there\tx"}});
  EXPECT_EQ(json::parse(out)["a"], "\"hi\" \\ there\tx");
}

TEST(Scripted, NullResponseIsPolicyError) {
  auto b = scripted(json::array({{{"match", ""}, {"response", nullptr}}}));
  EXPECT_THROW(b->complete(kChat), ScriptedPolicyError);
}

TEST(Scripted, PolicyShapeIsChecked) {
  EXPECT_THROW(scripted(json::array({{{"match", "x"}, {"response", "y"}}})), FormatError);
  EXPECT_THROW(scripted(json::array({{{"match", "("}, {"response", "y"}}, {{"match", ""}, {"response", "z"}}})),
               FormatError);
  EXPECT_THROW(scripted(json::array({{{"match", ""}, {"response", "z"}, {"escape", "xml"}}})), FormatError);
}

TEST(Scripted, CannotAdapt) {
  auto b = scripted(json::array({{{"match", ""}, {"response", "z"}}}));
  const auto delta = adapt::AdaptationVector::zeros(4);
  EXPECT_THROW(b->complete_adapted(kChat, delta), UnsupportedOperationError);
  EXPECT_THROW(b->adapt_and_complete(kChat, delta, {}), UnsupportedOperationError);
  EXPECT_EQ(b->adaptation_dim(), 0u);
}

struct FakeTransport : llm::HttpTransport {
  std::vector<llm::HttpResponse> replies;
  std::vector<std::map<std::string, std::string>> seen_headers;
  std::vector<std::string> seen_bodies;
  llm::HttpResponse post(const std::string&, const std::string& body,
                         const std::map<std::string, std::string>& headers) override {
    seen_bodies.push_back(body);
    seen_headers.push_back(headers);
    auto r = replies.front();
    if (replies.size() > 1) replies.erase(replies.begin());
    return r;
  }
};

std::string ok_reply(const std::string& text) {
  return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump();
}

llm::BackendConfig remote_config() {
  llm::BackendConfig c;
  c.kind = llm::BackendKind::Remote;
  c.model_id = "m";
  c.endpoint = "http://example.invalid";
  c.credential_env = "TTA_UNIT_TEST_KEY";
  c.retry = {3, 0.5};
  return c;
}

TEST(Remote, RequestBodyShape) {
  llm::RemoteBackend b(remote_config(), std::make_unique<FakeTransport>());
  const auto body = json::parse(b.request_body(kChat, {0.7, 9, 12}));
  EXPECT_EQ(body["model"], "m");
  EXPECT_EQ(body["messages"][1], (json{{"role", "user"}, {"content", "hello"}}));
  EXPECT_EQ(body["temperature"], 0.7);
  EXPECT_EQ(body["seed"], 9);
  EXPECT_EQ(body["max_tokens"], 12);
}

TEST(Remote, RetriesTransientFailuresWithBackoff) {
  ::setenv("TTA_UNIT_TEST_KEY", "sk-test", 1);
  auto t = std::make_unique<FakeTransport>();
  t->replies = {{503, "busy"}, {0, ""}, {200, ok_reply("done")}};
  auto* raw = t.get();
  std::vector<long long> waits;
  llm::RemoteBackend b(remote_config(), std::move(t), [&](std::chrono::milliseconds ms) { waits.push_back(ms.count()); });
  EXPECT_EQ(b.complete(kChat), "done");
  EXPECT_EQ(waits, (std::vector<long long>{500, 1000}));
  EXPECT_EQ(raw->seen_headers.back().at("Authorization"), "Bearer sk-test");
  ::unsetenv("TTA_UNIT_TEST_KEY");
}

TEST(Remote, PermanentFailureIsNotRetried) {
  auto t = std::make_unique<FakeTransport>();
  t->replies = {{400, "bad request"}};
  auto* raw = t.get();
  llm::RemoteBackend b(remote_config(), std::move(t), [](auto) {});
  EXPECT_THROW(b.complete(kChat), TransportError);
  EXPECT_EQ(raw->seen_bodies.size(), 1u);
}

TEST(Remote, GivesUpAfterMaxAttempts) {
  auto t = std::make_unique<FakeTransport>();
  t->replies = {{429, "slow down"}};
  auto* raw = t.get();
  llm::RemoteBackend b(remote_config(), std::move(t), [](auto) {});
  EXPECT_THROW(b.complete(kChat), TransportError);
  EXPECT_EQ(raw->seen_bodies.size(), 3u);
}

TEST(Remote, TransientStatuses) {
  for (int s : {0, 408, 429, 500, 502, 503, 504}) EXPECT_TRUE(llm::is_transient_status(s)) << s;
  for (int s : {200, 400, 401, 403, 404}) EXPECT_FALSE(llm::is_transient_status(s)) << s;
}

TEST(Remote, MalformedReplyIsTransportError) {
  EXPECT_THROW(llm::RemoteBackend::parse_reply("{}"), TransportError);
  EXPECT_THROW(llm::RemoteBackend::parse_reply("not json"), TransportError);
  EXPECT_EQ(llm::RemoteBackend::parse_reply(ok_reply("x")), "x");
}

TEST(Remote, TapesNeverHoldHeadersAndReplayInOrder) {
  const auto dir = tta::testing::scratch_dir("tape");
  const auto tape = dir / "t.jsonl";
  {
    auto inner = std::make_unique<FakeTransport>();
    inner->replies = {{200, ok_reply("one")}};
    llm::RecordingTransport rec(std::move(inner), tape);
    rec.post("/v1/chat/completions", "{\"a\":1}", {{"Authorization", "Bearer secret-value"}});
    rec.post("/v1/chat/completions", "{\"a\":2}", {{"Authorization", "Bearer secret-value"}});
  }
  const auto text = read_file(tape);
  EXPECT_EQ(text.find("secret-value"), std::string::npos);
  EXPECT_EQ(text.find("Authorization"), std::string::npos);

  llm::ReplayTransport replay(tape);
  EXPECT_EQ(replay.remaining(), 2u);
  EXPECT_EQ(replay.post("/v1/chat/completions", "{\"a\":1}", {}).status, 200);
  EXPECT_THROW(replay.post("/v1/chat/completions", "{\"a\":3}", {}), TransportError);
}

TEST(Remote, ReplayConfigNeedsNoCredential) {
  const auto dir = tta::testing::scratch_dir("tape_cfg");
  auto c = remote_config();
  c.credential_env = "TTA_UNIT_TEST_UNSET_KEY";
  c.tape_mode = llm::TapeMode::Replay;
  c.tape_path = dir / "t.jsonl";
  write_file(c.tape_path, json{{"request", {{"path", c.path}, {"body", llm::RemoteBackend(c, nullptr).request_body(kChat, {})}}},
                               {"response", {{"status", 200}, {"body", ok_reply("taped")}}}}
                                  .dump() +
                              "\n");
  EXPECT_EQ(llm::make_backend(c)->complete(kChat), "taped");
  c.tape_mode = llm::TapeMode::Off;
  EXPECT_THROW(llm::make_backend(c), ConfigError);
}

TEST(BackendConfig, ParsesAndValidates) {
  const auto c = llm::BackendConfig::from_json({{"kind", "scripted"}, {"script", "p.json"}}, "/base");
  EXPECT_EQ(c.script_path, std::filesystem::path("/base/p.json"));
  EXPECT_THROW(llm::BackendConfig::from_json({{"kind", "quantum"}}), ConfigError);
  EXPECT_THROW(llm::BackendConfig::from_json({{"kind", "remote"}}), ConfigError);
  EXPECT_THROW(llm::BackendConfig::from_json({{"kind", "local"}, {"temperature", -1}}), ConfigError);
}

class Local : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    llm::BackendConfig c;
    c.kind = llm::BackendKind::Local;
    c.max_tokens = 12;
    backend_ = llm::LocalBackend::load(c).release();
  }
  static void TearDownTestSuite() { delete backend_; }
  static llm::LocalBackend* backend_;
};
llm::LocalBackend* Local::backend_ = nullptr;

TEST_F(Local, GreedyDecodingIsDeterministic) {
  EXPECT_EQ(backend_->complete(kChat), backend_->complete(kChat));
  EXPECT_EQ(backend_->prompt_ids(kChat).front(), lm::Vocabulary::kBos);
  EXPECT_EQ(backend_->adaptation_dim(), 64u);
}

TEST_F(Local, SeededSamplingIsReproducible) {
  const llm::CompletionOverrides o{1.0, 77, 12};
  EXPECT_EQ(backend_->complete(kChat, o), backend_->complete(kChat, o));
}

TEST_F(Local, ZeroDeltaIsIdentity) {
  const auto zero = adapt::AdaptationVector::zeros(64);
  EXPECT_EQ(backend_->complete_adapted(kChat, zero), backend_->complete(kChat));
  EXPECT_THROW(backend_->complete_adapted(kChat, adapt::AdaptationVector::zeros(3)), DimensionError);
}

TEST_F(Local, AdaptAndCompleteReportsUpdate) {
  const auto out = backend_->adapt_and_complete(kChat, adapt::AdaptationVector::zeros(64), {0.1, 2});
  EXPECT_EQ(out.report.steps, 2);
  EXPECT_FALSE(out.delta.is_zero());
  EXPECT_LE(out.report.loss_after, out.report.loss_before);
  EXPECT_EQ(out.text, backend_->complete_adapted(kChat, out.delta));
}

TEST_F(Local, FixedLengthGeneration) {
  llm::LocalBackend::GenerateOptions opts;
  opts.fixed_length = true;
  const auto g = backend_->generate(backend_->prompt_ids(kChat), opts, {std::nullopt, std::nullopt, 7});
  EXPECT_EQ(g.tokens.size(), 7u);
}

TEST_F(Local, OversizedPromptIsCapacityError) {
  const std::vector<ChatMessage> big = {{Role::User, std::string(5000, '~')}};
  EXPECT_FALSE(backend_->fits(big));
  EXPECT_THROW(backend_->complete(big), CapacityError);
  EXPECT_TRUE(backend_->fits(kChat));
}

}  // namespace
