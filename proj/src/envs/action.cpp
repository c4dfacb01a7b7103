#include "tta/envs/action.hpp"

#include <cctype>
#include <optional>
#include <regex>

#include "tta/util.hpp"

namespace tta::env {

namespace {

using json = nlohmann::json;

std::string verb_name(WebVerb v) {
  switch (v) {
    case WebVerb::Click: return "click";
    case WebVerb::Type: return "type";
    case WebVerb::Hover: return "hover";
    case WebVerb::Press: return "press";
    case WebVerb::Scroll: return "scroll";
    case WebVerb::NewTab: return "new_tab";
    case WebVerb::TabFocus: return "tab_focus";
    case WebVerb::CloseTab: return "close_tab";
    case WebVerb::Goto: return "goto";
    case WebVerb::GoBack: return "go_back";
    case WebVerb::GoForward: return "go_forward";
  }
  return "?";
}

std::string format_value(const json& v) {
  if (v.is_boolean()) return v.get<bool>() ? "True" : "False";
  if (v.is_null()) return "None";
  return v.dump();
}

std::optional<StopAction> parse_stop(std::string_view body) {
  static const std::regex kStop(R"(^stop(?:\s*\[([\s\S]*)\])?$)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_match(body.begin(), body.end(), m, kStop)) return std::nullopt;
  return StopAction{m[1].matched ? m[1].str() : std::string{}};
}

ParsedAction parse_web(std::string_view body) {
  using It = std::string_view::const_iterator;
  std::match_results<It> m;
  auto match = [&](const std::regex& re) { return std::regex_match(body.begin(), body.end(), m, re); };

  static const std::regex kClick(R"(^click\s*\[(\d+)\]$)");
  static const std::regex kHover(R"(^hover\s*\[(\d+)\]$)");
  static const std::regex kType(
      R"(^type\s*\[(\d+)\]\s*\[([\s\S]*?)\](?:\s*\[(?:press_enter_after=)?([01])\])?$)");
  static const std::regex kPress(R"(^press\s*\[([^\]]+)\]$)");
  static const std::regex kScroll(R"(^scroll\s*\[(?:direction=)?(up|down)\]$)");
  static const std::regex kTabFocus(R"(^tab_focus\s*\[(\d+)\]$)");
  static const std::regex kGoto(R"(^goto\s*\[([^\]]+)\]$)");

  WebAction a;
  if (match(kClick)) {
    a.verb = WebVerb::Click;
    a.element_id = std::stoi(m[1].str());
  } else if (match(kHover)) {
    a.verb = WebVerb::Hover;
    a.element_id = std::stoi(m[1].str());
  } else if (match(kType)) {
    a.verb = WebVerb::Type;
    a.element_id = std::stoi(m[1].str());
    a.text = m[2].str();
    a.press_enter = !m[3].matched || m[3].str() == "1";
  } else if (match(kPress)) {
    a.verb = WebVerb::Press;
    a.text = m[1].str();
  } else if (match(kScroll)) {
    a.verb = WebVerb::Scroll;
    a.text = m[1].str();
  } else if (match(kTabFocus)) {
    a.verb = WebVerb::TabFocus;
    a.element_id = std::stoi(m[1].str());
  } else if (match(kGoto)) {
    a.verb = WebVerb::Goto;
    a.text = m[1].str();
  } else if (body == "new_tab") {
    a.verb = WebVerb::NewTab;
  } else if (body == "close_tab") {
    a.verb = WebVerb::CloseTab;
  } else if (body == "go_back") {
    a.verb = WebVerb::GoBack;
  } else if (body == "go_forward") {
    a.verb = WebVerb::GoForward;
  } else {
    return InvalidAction{"unrecognised web action: " + std::string(body)};
  }
  return a;
}

class CallParser {
 public:
  explicit CallParser(std::string_view s) : s_(s) {}

  ParsedAction parse() {
    FunctionCall call;
    skip_ws();
    call.name = identifier();
    if (call.name.empty()) return InvalidAction{"expected a function name"};
    skip_ws();
    if (!eat('(')) return InvalidAction{"expected '(' after " + call.name};
    skip_ws();
    if (!eat(')')) {
      while (true) {
        skip_ws();
        std::string key = identifier();
        if (key.empty()) return InvalidAction{"expected an argument name in call to " + call.name};
        skip_ws();
        if (!eat('=')) return InvalidAction{"expected '=' after argument " + key};
        skip_ws();
        auto value = parse_value();
        if (!value) return InvalidAction{"bad value for argument " + key};
        call.args.emplace_back(std::move(key), std::move(*value));
        skip_ws();
        if (eat(')')) break;
        if (!eat(',')) return InvalidAction{"expected ',' or ')' in call to " + call.name};
      }
    }
    skip_ws();
    if (pos_ != s_.size()) {
      return InvalidAction{"only one function call may be issued at a time"};
    }
    return call;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  std::string identifier() {
    std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' || s_[pos_] == '.')) {
      ++pos_;
    }
    if (start < pos_ && std::isdigit(static_cast<unsigned char>(s_[start]))) {
      pos_ = start;
      return {};
    }
    return std::string(s_.substr(start, pos_ - start));
  }
  std::optional<json> parse_value() {
    if (pos_ >= s_.size()) return std::nullopt;
    const char c = s_[pos_];
    if (c == '"') {
      std::size_t start = pos_++;
      while (pos_ < s_.size() && s_[pos_] != '"') pos_ += (s_[pos_] == '\\') ? 2 : 1;
      if (pos_ >= s_.size()) return std::nullopt;
      ++pos_;
      try {
        return json::parse(s_.substr(start, pos_ - start));
      } catch (const json::exception&) {
        return std::nullopt;
      }
    }
    if (c == '\'') {
      std::string out;
      ++pos_;
      while (pos_ < s_.size() && s_[pos_] != '\'') {
        if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) ++pos_;
        out += s_[pos_++];
      }
      if (!eat('\'')) return std::nullopt;
      return json(out);
    }
    std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ')' &&
           !std::isspace(static_cast<unsigned char>(s_[pos_]))) {
      ++pos_;
    }
    const std::string word(s_.substr(start, pos_ - start));
    if (word == "True" || word == "true") return json(true);
    if (word == "False" || word == "false") return json(false);
    if (word == "None" || word == "null") return json(nullptr);
    static const std::regex kNumber(R"(^-?\d+(\.\d+)?([eE][-+]?\d+)?$)");
    if (std::regex_match(word, kNumber)) return json::parse(word);
    return std::nullopt;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

ParsedAction parse_call(std::string_view body) {
  std::string inner = trim(body);
  if (inner.size() >= 2 && inner.front() == '[' && inner.back() == ']') {
    inner = trim(std::string_view(inner).substr(1, inner.size() - 2));
  }
  return CallParser(inner).parse();
}

}  // namespace

std::string to_string(EnvKind kind) {
  return kind == EnvKind::Web ? "web" : "function_calling";
}

const nlohmann::json* FunctionCall::arg(std::string_view key) const {
  for (const auto& [k, v] : args) {
    if (k == key) return &v;
  }
  return nullptr;
}

std::string canonical(const ParsedAction& action) {
  struct Visitor {
    std::string operator()(const WebAction& a) const {
      const std::string v = verb_name(a.verb);
      switch (a.verb) {
        case WebVerb::Click:
        case WebVerb::Hover:
        case WebVerb::TabFocus:
          return v + " [" + std::to_string(a.element_id) + "]";
        case WebVerb::Type:
          return v + " [" + std::to_string(a.element_id) + "] [" + a.text + "] [" +
                 (a.press_enter ? "1" : "0") + "]";
        case WebVerb::Press:
        case WebVerb::Scroll:
        case WebVerb::Goto:
          return v + " [" + a.text + "]";
        default:
          return v;
      }
    }
    std::string operator()(const FunctionCall& c) const {
      std::string out = c.name + "(";
      for (std::size_t i = 0; i < c.args.size(); ++i) {
        if (i) out += ", ";
        out += c.args[i].first + "=" + format_value(c.args[i].second);
      }
      return out + ")";
    }
    std::string operator()(const StopAction& s) const { return "stop [" + s.answer + "]"; }
    std::string operator()(const InvalidAction& i) const { return "invalid: " + i.reason; }
  };
  return std::visit(Visitor{}, action);
}

ParsedAction parse_action_body(std::string_view body, EnvKind kind) {
  const std::string text = trim(body);
  if (text.empty()) return InvalidAction{"empty action"};
  if (auto stop = parse_stop(text)) return *stop;
  return kind == EnvKind::Web ? parse_web(text) : parse_call(text);
}

}  // namespace tta::env
