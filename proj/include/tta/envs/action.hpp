#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace tta::env {

enum class EnvKind { Web, FunctionCalling };

std::string to_string(EnvKind kind);

enum class WebVerb {
  Click,
  Type,
  Hover,
  Press,
  Scroll,
  NewTab,
  TabFocus,
  CloseTab,
  Goto,
  GoBack,
  GoForward,
};

// element_id is used by click/type/hover (and the tab index for tab_focus);
// text carries typed content, key combination, url or scroll direction.
struct WebAction {
  WebVerb verb = WebVerb::Click;
  int element_id = -1;
  std::string text;
  bool press_enter = true;

  friend bool operator==(const WebAction&, const WebAction&) = default;
};

struct FunctionCall {
  std::string name;
  std::vector<std::pair<std::string, nlohmann::json>> args;

  const nlohmann::json* arg(std::string_view key) const;
  friend bool operator==(const FunctionCall&, const FunctionCall&) = default;
};

struct StopAction {
  std::string answer;
  friend bool operator==(const StopAction&, const StopAction&) = default;
};

struct InvalidAction {
  std::string reason;
  friend bool operator==(const InvalidAction&, const InvalidAction&) = default;
};

using ParsedAction = std::variant<WebAction, FunctionCall, StopAction, InvalidAction>;

struct Action {
  std::string raw;
  ParsedAction parsed;

  bool is_invalid() const { return std::holds_alternative<InvalidAction>(parsed); }
  bool is_stop() const { return std::holds_alternative<StopAction>(parsed); }
};

// Canonical raw form, e.g. "click [12]", "type [2] [Paris] [0]",
// "wc(file_name=\"notes.txt\", mode=\"w\")", "stop [$279.49]".
// Invalid actions render as their reason.
std::string canonical(const ParsedAction& action);

// Parses an unfenced action body against one grammar. Never throws; a body
// that fits neither grammar comes back as InvalidAction. stop [answer] is
// accepted in both grammars.
ParsedAction parse_action_body(std::string_view body, EnvKind kind);

}  // namespace tta::env
