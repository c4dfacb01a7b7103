#include "tta/grounding/pipeline.hpp"

#include <algorithm>
#include <regex>
#include <set>

#include "tta/agent/agent.hpp"
#include "tta/errors.hpp"
#include "tta/prompts.hpp"
#include "tta/util.hpp"

namespace tta::grounding {

using json = nlohmann::json;
using llm::ChatMessage;
using llm::Role;

namespace {

constexpr const char* kJsonReprompt = "Your reply could not be parsed. Reply again with only the JSON described above.";

// Calls the backend, parses JSON from the reply and retries once.
template <typename Parse>
auto ask_json(llm::Backend& backend, std::vector<ChatMessage> messages, bool want_array, Parse parse,
              const llm::CompletionOverrides& overrides = {}) -> std::optional<decltype(parse(json{}))> {
  for (int attempt = 0; attempt < 2; ++attempt) {
    const std::string reply = backend.complete(messages, overrides);
    if (auto j = extract_json(reply, want_array)) {
      try {
        return parse(*j);
      } catch (const json::exception&) {
      } catch (const RuleSetError&) {
      }
    }
    messages.push_back({Role::Assistant, reply});
    messages.push_back({Role::User, kJsonReprompt});
  }
  return std::nullopt;
}

std::string fs_state(const json& snapshot) {
  std::string out = "Current directory: " + snapshot.at("cwd").get<std::string>() + "\nContents: ";
  const json* node = &snapshot.at("tree");
  const std::string cwd = snapshot.at("cwd").get<std::string>();
  const std::string root = std::string("/") + "workspace";
  std::string rest = cwd.size() > root.size() ? cwd.substr(root.size() + 1) : std::string{};
  std::size_t pos = 0;
  while (!rest.empty() && pos != std::string::npos) {
    const auto slash = rest.find('/', pos);
    node = &node->at(rest.substr(pos, slash == std::string::npos ? std::string::npos : slash - pos));
    pos = slash == std::string::npos ? slash : slash + 1;
  }
  std::vector<std::string> names;
  for (const auto& [name, child] : node->items()) names.push_back(child.is_object() ? name + "/" : name);
  std::sort(names.begin(), names.end());
  if (names.empty()) out += "(empty)";
  for (std::size_t i = 0; i < names.size(); ++i) out += (i ? ", " : "") + names[i];
  return out;
}

std::string observation_for(const env::Environment& environment, const env::Observation& obs,
                            const std::string& output) {
  if (environment.kind() == env::EnvKind::Web) return "URL: " + obs.url + "\n" + obs.text;
  return fs_state(environment.snapshot()) + "\nOutput: " + (output.empty() ? "None" : output);
}

std::vector<ChatMessage> web_explore_messages(const std::string& persona, const env::Observation& obs,
                                              const std::vector<DynamicsRule>& rules,
                                              const std::vector<std::string>& previous) {
  std::string user = "PERSONA: " + persona + "\nOBSERVATION:\n" + obs.text + "\nURL: " + obs.url +
                     "\nENVIRONMENTAL DYNAMICS:\n" + (rules.empty() ? "None" : render_rules(rules)) +
                     "\nPREVIOUS ACTIONS:";
  if (previous.empty()) user += "\nNone";
  for (std::size_t i = 0; i < previous.size(); ++i) user += "\n" + std::to_string(i + 1) + ". " + previous[i];
  return {{Role::System, prompts::get("web_exploration")}, {Role::User, std::move(user)}};
}

std::vector<ChatMessage> fs_explore_messages(const std::string& tools, const std::vector<DynamicsRule>& rules,
                                             const std::vector<ChatMessage>& turns) {
  std::string system = fill_template(prompts::get("fs_exploration"), {{"TOOLS", trim(tools)}});
  if (!rules.empty()) {
    system += "\n\n" + fill_template(prompts::get("rules_section"), {{"RULES", render_rules(rules)}});
  }
  std::vector<ChatMessage> messages{{Role::System, std::move(system)}};
  messages.insert(messages.end(), turns.begin(), turns.end());
  return messages;
}

const std::regex& element_line() {
  // The label stops before an optional " value: '...'" suffix.
  static const std::regex re(R"(^\[(\d+)\] \S+ '(.*?)'(?: value: '.*')?$)");
  return re;
}

}  // namespace

std::optional<json> extract_json(std::string_view text, bool want_array) {
  const char open = want_array ? '[' : '{';
  const char close = want_array ? ']' : '}';
  for (std::size_t start = text.find(open); start != std::string_view::npos; start = text.find(open, start + 1)) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (c == '\\') ++i;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '[' || c == '{') ++depth;
      else if (c == ']' || c == '}') {
        if (--depth == 0) {
          if (c != close) break;
          json j = json::parse(text.substr(start, i - start + 1), nullptr, false);
          if (!j.is_discarded()) return j;
          break;
        }
      }
    }
  }
  return std::nullopt;
}

std::vector<Persona> synthesize_personas(llm::Backend& backend, const std::string& website,
                                         const std::string& description, int n) {
  if (n < 1) throw ConfigError("persona count must be at least 1");
  const std::string prompt = fill_template(prompts::get("persona_synthesis"),
                                           {{"N", std::to_string(n)}, {"WEBSITE", website}, {"DESCRIPTION", description}});
  auto parse = [&](const json& j) {
    std::vector<Persona> out;
    std::set<std::string> names;
    for (const auto& p : j) {
      Persona persona{trim(p.at("persona").get<std::string>()), trim(p.at("description").get<std::string>())};
      if (persona.persona.empty() || persona.description.empty()) throw json::other_error::create(501, "empty persona", &p);
      if (!names.insert(persona.persona).second) continue;
      out.push_back(std::move(persona));
      if (static_cast<int>(out.size()) == n) break;
    }
    if (out.empty()) throw json::other_error::create(501, "no personas", &j);
    return out;
  };
  auto result = ask_json(backend, {{Role::User, prompt}}, true, parse);
  if (!result) throw SynthesisError("persona synthesis reply was not a valid JSON persona array after one retry");
  return *result;
}

std::vector<std::string> synthesize_goals(llm::Backend& backend, const std::string& environment,
                                          const std::string& tool_docs, int n) {
  if (n < 1) throw ConfigError("goal count must be at least 1");
  const std::string prompt = fill_template(prompts::get("goal_synthesis"),
                                           {{"N", std::to_string(n)}, {"ENVIRONMENT", environment}, {"FUNCTIONS", trim(tool_docs)}});
  auto parse = [&](const json& j) {
    std::vector<std::string> out;
    for (const auto& g : j) {
      std::string goal = trim(g.get<std::string>());
      if (goal.empty()) continue;
      out.push_back(std::move(goal));
      if (static_cast<int>(out.size()) == n) break;
    }
    if (out.empty()) throw json::other_error::create(501, "no goals", &j);
    return out;
  };
  auto result = ask_json(backend, {{Role::User, prompt}}, true, parse);
  if (!result) throw SynthesisError("goal synthesis reply was not a valid JSON string array after one retry");
  return *result;
}

std::string describe_action(const env::Action& action, const std::string& observation_text) {
  if (action.is_invalid()) return "invalid action: " + normalize_whitespace(action.raw);
  const std::string canon = env::canonical(action.parsed);
  const auto* web = std::get_if<env::WebAction>(&action.parsed);
  if (!web || web->element_id < 0 || web->verb == env::WebVerb::TabFocus) return canon;
  std::smatch m;
  std::size_t start = 0;
  while (start <= observation_text.size()) {
    auto end = observation_text.find('\n', start);
    if (end == std::string::npos) end = observation_text.size();
    const std::string line = observation_text.substr(start, end - start);
    if (std::regex_match(line, m, element_line()) && std::stoi(m[1].str()) == web->element_id) {
      return canon + " where [" + m[1].str() + "] is " + m[2].str();
    }
    start = end + 1;
  }
  return canon;
}

DynamicsRule extract_rule(llm::Backend& extractor, const TransitionRecord& t, env::EnvKind kind) {
  const std::string system = prompts::get(kind == env::EnvKind::Web ? "web_extraction" : "fs_extraction");
  const std::string user =
      "INITIAL STATE:\n" + t.obs_before + "\nACTION:\n" + t.action + "\nFINAL STATE:\n" + t.obs_after;
  auto parse = [](const json& j) {
    DynamicsRule r;
    r.initial_state = trim(j.at("initial_state").get<std::string>());
    r.environmental_dynamics = trim(j.at("environmental_dynamics").get<std::string>());
    if (r.initial_state.empty() || r.environmental_dynamics.empty()) throw RuleSetError("empty rule field");
    return r;
  };
  auto rule = ask_json(extractor, {{Role::System, system}, {Role::User, user}}, false, parse);
  if (!rule) throw ExtractionError("could not extract a rule for step " + std::to_string(t.step) + " of " + t.episode_id);
  rule->action = t.action;
  if (t.obs_before == t.obs_after) rule->environmental_dynamics = "no change";
  return *rule;
}

ExploreResult explore(env::Environment& environment, llm::Backend& explorer, const std::string& persona_or_goal,
                      llm::Backend& extractor, const ExploreOptions& options) {
  ExploreResult result;
  if (environment.tasks().empty()) throw ConfigError("environment " + environment.id() + " has no tasks to reset into");
  llm::CompletionOverrides overrides;
  overrides.temperature = options.temperature;

  env::Observation obs = environment.reset(environment.tasks().front(), options.seed);
  std::string last_output = obs.text;
  const bool web = environment.kind() == env::EnvKind::Web;
  const std::string tools = web ? std::string{} : environment.render_tools();
  std::vector<std::string> previous;
  std::vector<ChatMessage> turns;
  if (!web) {
    turns.push_back({Role::User, "EXPLORATION GOAL: " + persona_or_goal});
    turns.push_back({Role::User, "ENVIRONMENT:\n" + obs.text});
  }

  auto extract = [&](const TransitionRecord& t) {
    try {
      result.rules.push_back(extract_rule(extractor, t, environment.kind()));
    } catch (const ExtractionError& e) {
      result.skipped.push_back(e.what());
    }
  };

  for (int step = 0; step < options.max_steps; ++step) {
    std::string raw;
    try {
      const auto messages = web ? web_explore_messages(persona_or_goal, obs, result.rules, previous)
                                : fs_explore_messages(tools, result.rules, turns);
      raw = explorer.complete(messages, overrides);
    } catch (const TransportError& e) {
      result.error = std::string("transport: ") + e.what();
      break;
    } catch (const ScriptedPolicyError& e) {
      result.error = std::string("scripted_policy: ") + e.what();
      break;
    }
    const env::Action action = agent::parse_action(raw, environment.kind());
    if (action.is_stop()) break;

    TransitionRecord t;
    t.obs_before = observation_for(environment, obs, last_output);
    t.action = describe_action(action, obs.text);
    t.step = step;
    t.episode_id = options.episode_id;
    const env::StepResult stepped = environment.step(action);
    obs = stepped.observation;
    last_output = stepped.observation.text;
    t.obs_after = observation_for(environment, obs, last_output);
    result.transitions.push_back(t);
    previous.push_back(action.is_invalid() ? "(invalid) " + normalize_whitespace(raw) : env::canonical(action.parsed));
    if (!web) {
      turns.push_back({Role::Assistant, raw});
      turns.push_back({Role::User, "ENVIRONMENT:\n" + (obs.text.empty() ? std::string("None") : obs.text)});
    }
    if (options.on_the_fly) extract(t);
    if (stepped.outcome == env::StepOutcome::Terminal) break;

    if (!web) {
      try {
        auto probe = fs_explore_messages(tools, result.rules, turns);
        probe.push_back({Role::User, prompts::get("fs_stop_probe")});
        if (contains(explorer.complete(probe, overrides), "###STOP")) {
          result.stopped_by_probe = true;
          break;
        }
      } catch (const TransportError& e) {
        result.error = std::string("transport: ") + e.what();
        break;
      } catch (const ScriptedPolicyError& e) {
        result.error = std::string("scripted_policy: ") + e.what();
        break;
      }
    }
  }
  if (!options.on_the_fly) {
    for (const auto& t : result.transitions) extract(t);
  }
  return result;
}

bool is_no_change(const std::string& dynamics) {
  std::string d = to_lower(normalize_whitespace(dynamics));
  while (!d.empty() && (d.back() == '.' || d.back() == '!')) d.pop_back();
  return d == "no change" || d == "no changes";
}

bool is_scroll_or_pagination(const DynamicsRule& rule) {
  static const std::regex kAction(R"(^\s*scroll\b)", std::regex::icase);
  static const std::regex kDynamics(
      R"(\bscroll(ed|ing|s)?\b|\bpaginat|\bnext page of\b|\bprevious page of\b|\breveal(s|ed|ing)? more\b|\bmore (content|items|results)\b)",
      std::regex::icase);
  return std::regex_search(rule.action, kAction) || std::regex_search(rule.environmental_dynamics, kDynamics);
}

std::vector<DynamicsRule> heuristic_filter(const std::vector<DynamicsRule>& rules) {
  std::vector<DynamicsRule> out;
  for (const auto& r : rules) {
    if (is_no_change(r.environmental_dynamics) || is_scroll_or_pagination(r)) continue;
    if (std::find(out.begin(), out.end(), r) != out.end()) continue;
    out.push_back(r);
  }
  return out;
}

std::vector<DynamicsRule> llm_filter(llm::Backend& backend, const std::vector<DynamicsRule>& rules, env::EnvKind kind) {
  nlohmann::ordered_json array = nlohmann::ordered_json::array();
  for (const auto& r : rules) array.push_back(to_json(r));
  const std::string prompt =
      fill_template(prompts::get(kind == env::EnvKind::Web ? "web_filter" : "fs_filter"), {{"RULES", array.dump(2)}});
  const std::string reply = backend.complete({{Role::User, prompt}});
  const auto j = extract_json(reply, true);
  if (!j) throw FilteringError("filter reply contains no JSON array");
  std::vector<bool> keep(rules.size(), false);
  for (const auto& item : *j) {
    DynamicsRule r;
    try {
      r = rule_from_json(item);
    } catch (const RuleSetError& e) {
      throw FilteringError(std::string("filter reply has a malformed rule: ") + e.what());
    }
    auto it = std::find(rules.begin(), rules.end(), r);
    if (it == rules.end()) throw FilteringError("filter reply contains a rule not present in its input: " + item.dump());
    keep[static_cast<std::size_t>(it - rules.begin())] = true;
  }
  std::vector<DynamicsRule> out;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    if (keep[i]) out.push_back(rules[i]);
  }
  return out;
}

std::vector<DynamicsRule> dedupe_state_action(const std::vector<DynamicsRule>& rules) {
  std::set<std::pair<std::string, std::string>> seen;
  std::vector<DynamicsRule> out;
  for (const auto& r : rules) {
    if (seen.insert({r.initial_state, r.action}).second) out.push_back(r);
  }
  return out;
}

RuleSet filter_rules(llm::Backend& backend, const RuleSet& raw, env::EnvKind kind, std::string* warning) {
  if (raw.rules.empty()) throw RuleSetError("cannot filter an empty rule set");
  RuleSet out;
  out.env = raw.env;
  out.provenance = raw.provenance;
  out.provenance.filtered = true;
  std::vector<DynamicsRule> kept = heuristic_filter(raw.rules);
  if (!kept.empty()) {
    try {
      kept = llm_filter(backend, kept, kind);
    } catch (const FilteringError& e) {
      if (warning) *warning = std::string("model filter rejected, using heuristic result: ") + e.what();
    } catch (const TransportError& e) {
      if (warning) *warning = std::string("model filter unavailable, using heuristic result: ") + e.what();
    } catch (const ScriptedPolicyError& e) {
      if (warning) *warning = std::string("model filter unavailable, using heuristic result: ") + e.what();
    }
  }
  out.rules = dedupe_state_action(kept);
  return out;
}

}  // namespace tta::grounding
