#include "tta/agent/agent.hpp"

#include <chrono>

#include "tta/errors.hpp"
#include "tta/prompts.hpp"
#include "tta/util.hpp"

namespace tta::agent {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
using llm::ChatMessage;
using llm::Role;

std::string to_string(ContextMode mode) {
  return mode == ContextMode::LastObs ? "last_obs" : "full_interleaved";
}

ContextMode context_mode_from_string(const std::string& s) {
  if (s == "last_obs") return ContextMode::LastObs;
  if (s == "full_interleaved") return ContextMode::FullInterleaved;
  throw ConfigError("unknown context mode '" + s + "' (expected last_obs or full_interleaved)");
}

std::string to_string(PromptProfile profile) {
  return profile == PromptProfile::Verbose ? "verbose" : "compact";
}

PromptProfile prompt_profile_from_string(const std::string& s) {
  if (s == "verbose") return PromptProfile::Verbose;
  if (s == "compact") return PromptProfile::Compact;
  throw ConfigError("unknown prompt profile '" + s + "' (expected verbose or compact)");
}

ContextMode default_context_mode(env::EnvKind kind) {
  return kind == env::EnvKind::Web ? ContextMode::LastObs : ContextMode::FullInterleaved;
}

adapt::ResetPolicy default_reset_policy(env::EnvKind kind) {
  return kind == env::EnvKind::Web ? adapt::ResetPolicy::PerEpisode : adapt::ResetPolicy::PerTurn;
}

namespace {

std::string system_prompt(const ContextOptions& options, const grounding::RuleSet* rules) {
  const bool compact = options.profile == PromptProfile::Compact;
  std::string text;
  if (options.env_kind == env::EnvKind::Web) {
    text = prompts::get(compact ? "web_system_compact" : "web_system");
  } else {
    text = fill_template(prompts::get(compact ? "fs_system_compact" : "fs_system"),
                         {{"TOOLS", trim(options.tool_docs)}});
  }
  if (rules && !rules->empty()) {
    text += "\n\n" + fill_template(prompts::get("rules_section"), {{"RULES", grounding::render_rules(rules->rules)}});
  }
  return text;
}

std::vector<ChatMessage> render(const ContextSequence& ctx, const std::string& system, ContextMode mode) {
  std::vector<ChatMessage> messages{{Role::System, system}};
  if (mode == ContextMode::LastObs) {
    std::string user = "OBJECTIVE: " + ctx.instruction + "\nOBSERVATION:\n" + ctx.observation + "\n";
    if (!ctx.url.empty()) user += "URL: " + ctx.url + "\n";
    user += "PREVIOUS ACTIONS:";
    if (ctx.history.empty()) user += "\nNone";
    int n = 0;
    for (const auto& item : ctx.history) {
      if (item.kind == HistoryItem::Kind::Action) user += "\n" + std::to_string(++n) + ". " + item.text;
    }
    messages.push_back({Role::User, std::move(user)});
    return messages;
  }
  for (const auto& item : ctx.history) {
    switch (item.kind) {
      case HistoryItem::Kind::UserQuery:
        messages.push_back({Role::User, "USER QUERY:\n" + item.text});
        break;
      case HistoryItem::Kind::Observation:
        messages.push_back({Role::User, "ENVIRONMENT:\n" + item.text});
        break;
      case HistoryItem::Kind::Action:
        messages.push_back({Role::Assistant, item.text});
        break;
    }
  }
  return messages;
}

// Index of the oldest history entry that may be dropped, if any.
std::optional<std::size_t> droppable(const std::vector<HistoryItem>& history, ContextMode mode) {
  if (mode == ContextMode::LastObs) {
    if (history.empty()) return std::nullopt;
    return 0;
  }
  std::optional<std::size_t> latest_query;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (history[i].kind == HistoryItem::Kind::UserQuery) latest_query = i;
  }
  for (std::size_t i = 1; i + 1 < history.size(); ++i) {
    if (latest_query && i == *latest_query) continue;
    return i;
  }
  return std::nullopt;
}

std::string action_summary(const env::Action& action) {
  if (!action.is_invalid()) return env::canonical(action.parsed);
  std::string raw = normalize_whitespace(action.raw);
  if (raw.size() > 80) raw = raw.substr(0, 77) + "...";
  return "(invalid) " + raw;
}

}  // namespace

ContextSequence build_context(const std::string& instruction, const env::Observation* obs,
                              std::vector<HistoryItem> history, const grounding::RuleSet* rules,
                              const ContextOptions& options, const llm::Backend* backend,
                              const llm::CompletionOverrides& overrides) {
  ContextSequence ctx;
  ctx.instruction = instruction;
  if (obs) {
    ctx.observation = obs->text;
    ctx.url = obs->url;
  } else if (!history.empty() && history.back().kind == HistoryItem::Kind::Observation) {
    ctx.observation = history.back().text;
  }
  if (options.mode == ContextMode::LastObs && !obs) throw ConfigError("last_obs context needs an observation");
  if (rules) ctx.rules = rules->rules;
  ctx.history = std::move(history);

  const std::string system = system_prompt(options, rules);
  ctx.messages = render(ctx, system, options.mode);
  if (!backend) return ctx;
  while (!backend->fits(ctx.messages, overrides)) {
    const auto victim = droppable(ctx.history, options.mode);
    if (!victim) {
      throw CapacityError("instruction, observation and rules alone exceed the model context");
    }
    ctx.history.erase(ctx.history.begin() + static_cast<std::ptrdiff_t>(*victim));
    ctx.truncated = true;
    ++ctx.dropped;
    ctx.messages = render(ctx, system, options.mode);
  }
  return ctx;
}

std::optional<std::string> last_fenced_block(std::string_view raw) {
  std::vector<std::size_t> fences;
  for (std::size_t pos = raw.find("```"); pos != std::string_view::npos; pos = raw.find("```", pos + 3)) {
    fences.push_back(pos);
  }
  if (fences.size() < 2) return std::nullopt;
  const std::size_t pair = fences.size() / 2 - 1;
  const std::size_t open = fences[2 * pair] + 3;
  std::string body(raw.substr(open, fences[2 * pair + 1] - open));
  // Drop a language tag such as ```python\n...
  const auto newline = body.find('\n');
  if (newline != std::string::npos) {
    const std::string tag = trim(std::string_view(body).substr(0, newline));
    const bool is_tag = !tag.empty() && tag.find_first_not_of("abcdefghijklmnopqrstuvwxyz") == std::string::npos;
    if (is_tag && !trim(std::string_view(body).substr(newline + 1)).empty()) body = body.substr(newline + 1);
  }
  return trim(body);
}

env::Action parse_action(std::string_view raw, env::EnvKind kind) {
  env::Action action;
  action.raw = std::string(raw);
  const auto block = last_fenced_block(raw);
  if (!block) {
    action.parsed = env::InvalidAction{"no fenced action found in: " + std::string(raw)};
    return action;
  }
  action.parsed = env::parse_action_body(*block, kind);
  return action;
}

EpisodeResult run_episode(env::Environment& environment, const env::TaskSpec& task, llm::Backend& backend,
                          const EpisodeOptions& options) {
  using Clock = std::chrono::steady_clock;
  const auto episode_start = Clock::now();

  EpisodeResult result;
  result.env_id = environment.id();
  result.task_id = task.id;
  result.seed = options.seed;

  std::optional<adapt::AdaptationVector> delta;
  if (options.adaptation) {
    options.adaptation->validate();
    const std::size_t d = backend.adaptation_dim();
    if (d == 0) throw UnsupportedOperationError("backend " + backend.model_id() + " cannot run test-time adaptation");
    delta = adapt::AdaptationVector::zeros(d, task.id + "#" + std::to_string(options.seed));
    delta = adapt::maybe_reset(*delta, adapt::ResetEvent::EpisodeStart, *options.adaptation);
    delta = adapt::maybe_reset(*delta, adapt::ResetEvent::TurnStart, *options.adaptation);
  }

  ContextOptions ctx_options;
  ctx_options.mode = options.mode;
  ctx_options.profile = options.profile;
  ctx_options.env_kind = environment.kind();
  if (environment.kind() == env::EnvKind::FunctionCalling) ctx_options.tool_docs = environment.render_tools();

  env::Observation obs = environment.reset(task, options.seed);
  std::vector<HistoryItem> history;
  if (options.mode == ContextMode::FullInterleaved) {
    history.push_back({HistoryItem::Kind::UserQuery, task.instruction()});
    history.push_back({HistoryItem::Kind::Observation, obs.text});
  }
  std::string instruction = task.instruction();
  int turn = 0;
  const int budget = options.max_steps.value_or(task.max_steps);

  for (int step = 0; step < budget; ++step) {
    const auto step_start = Clock::now();
    StepRecord record;
    record.index = step;
    record.turn = turn;
    const std::string& seen = options.mode == ContextMode::LastObs
                                  ? obs.text
                                  : (history.back().kind == HistoryItem::Kind::Observation ? history.back().text
                                                                                          : std::string{});
    record.obs_hash = hex64(fnv1a64(seen));

    std::string raw;
    try {
      const auto ctx = build_context(instruction, options.mode == ContextMode::LastObs ? &obs : nullptr, history,
                                     options.rules, ctx_options, &backend);
      record.truncated = ctx.truncated;
      if (delta) {
        auto adapted = backend.adapt_and_complete(ctx.messages, *delta, *options.adaptation);
        delta = std::move(adapted.delta);
        record.update = adapted.report;
        raw = std::move(adapted.text);
      } else {
        raw = backend.complete(ctx.messages);
      }
    } catch (const CapacityError& e) {
      result.error = std::string("capacity: ") + e.what();
    } catch (const TransportError& e) {
      result.error = std::string("transport: ") + e.what();
    } catch (const ScriptedPolicyError& e) {
      result.error = std::string("scripted_policy: ") + e.what();
    } catch (const NumericInstabilityError& e) {
      result.error = std::string("numeric: ") + e.what();
    }
    if (result.error) break;

    const env::Action action = parse_action(raw, environment.kind());
    const env::StepResult stepped = environment.step(action);
    record.raw_action = raw;
    record.action = action.is_invalid() ? "invalid" : env::canonical(action.parsed);
    record.outcome = stepped.outcome;
    if (options.record_timing) {
      record.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - step_start).count();
    }
    result.records.push_back(std::move(record));
    ++result.steps;

    if (const auto* stop = std::get_if<env::StopAction>(&action.parsed)) result.answer = stop->answer;

    if (options.mode == ContextMode::LastObs) {
      history.push_back({HistoryItem::Kind::Action, action_summary(action)});
    } else {
      history.push_back({HistoryItem::Kind::Action, raw});
      if (stepped.next_user_query) {
        history.push_back({HistoryItem::Kind::UserQuery, *stepped.next_user_query});
      } else if (stepped.outcome != env::StepOutcome::Terminal) {
        history.push_back({HistoryItem::Kind::Observation, stepped.observation.text});
      }
    }
    if (stepped.next_user_query) {
      ++turn;
      instruction = *stepped.next_user_query;
      if (options.mode == ContextMode::LastObs) history.clear();
      if (delta) delta = adapt::maybe_reset(*delta, adapt::ResetEvent::TurnStart, *options.adaptation);
    }
    if (!stepped.next_user_query) obs = stepped.observation;
    if (stepped.outcome == env::StepOutcome::Terminal) {
      result.terminated = true;
      break;
    }
  }

  result.final_state = environment.snapshot();
  env::Trajectory trajectory;
  trajectory.terminated = result.terminated;
  trajectory.answer = result.answer;
  trajectory.final_state = result.final_state;
  result.success = !result.error && environment.evaluate(task, trajectory);
  if (options.record_timing) {
    result.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - episode_start).count();
  }
  return result;
}

std::string trajectory_jsonl(const EpisodeResult& result, bool include_timing) {
  std::string out;
  for (const auto& r : result.records) {
    ojson line;
    line["schema"] = kTrajectorySchemaVersion;
    line["type"] = "step";
    line["env"] = result.env_id;
    line["task"] = result.task_id;
    line["seed"] = result.seed;
    line["step"] = r.index;
    line["turn"] = r.turn;
    line["obs_hash"] = r.obs_hash;
    line["raw_action"] = r.raw_action;
    line["action"] = r.action;
    line["outcome"] = env::to_string(r.outcome);
    line["truncated"] = r.truncated;
    if (r.update) {
      line["update"] = {{"loss_before", r.update->loss_before},
                        {"loss_after", r.update->loss_after},
                        {"gradient_norm", r.update->gradient_norm},
                        {"steps", r.update->steps}};
    }
    if (include_timing) line["wall_ms"] = r.wall_ms;
    out += line.dump() + "\n";
  }
  ojson end;
  end["schema"] = kTrajectorySchemaVersion;
  end["type"] = "end";
  end["env"] = result.env_id;
  end["task"] = result.task_id;
  end["seed"] = result.seed;
  end["success"] = result.success;
  end["steps"] = result.steps;
  end["terminated"] = result.terminated;
  end["answer"] = result.answer ? ojson(*result.answer) : ojson(nullptr);
  end["error"] = result.error ? ojson(*result.error) : ojson(nullptr);
  if (include_timing) end["wall_ms"] = result.wall_ms;
  out += end.dump() + "\n";
  return out;
}

}  // namespace tta::agent
