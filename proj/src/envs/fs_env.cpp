#include "tta/envs/fs_env.hpp"

#include <sstream>

#include "tta/errors.hpp"
#include "tta/util.hpp"

namespace tta::env {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string respond(const ojson& j) { return j.dump(); }
std::string error_response(const std::string& message) { return respond(ojson{{"error", message}}); }

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '/')) {
    if (!part.empty() && part != ".") parts.push_back(part);
  }
  return parts;
}

bool type_matches(const json& value, const std::string& type) {
  if (type == "string") return value.is_string();
  if (type == "boolean") return value.is_boolean();
  if (type == "integer") return value.is_number_integer();
  if (type == "float" || type == "number") return value.is_number();
  return true;
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += (c == '\n');
  if (!s.empty() && s.back() != '\n') ++n;
  return n;
}

std::size_t count_words(const std::string& s) {
  std::istringstream in(s);
  std::size_t n = 0;
  std::string w;
  while (in >> w) ++n;
  return n;
}

}  // namespace

FsEnv::FsEnv(std::map<std::string, Node> fixtures, std::vector<ToolDoc> tools, std::string description,
             std::vector<TaskSpec> tasks)
    : fixtures_(std::move(fixtures)),
      tools_(std::move(tools)),
      description_(std::move(description)),
      tasks_(std::move(tasks)) {}

FsEnv::Node FsEnv::node_from_json(const json& j) {
  Node node;
  if (j.is_string()) {
    node.is_dir = false;
    node.content = j.get<std::string>();
    return node;
  }
  if (!j.is_object()) throw FormatError("file-system node must be a string or an object");
  for (const auto& [name, child] : j.items()) {
    if (name.empty() || name.find('/') != std::string::npos) throw FormatError("bad file-system entry name: " + name);
    node.children.emplace(name, node_from_json(child));
  }
  return node;
}

json FsEnv::node_to_json(const Node& node) {
  if (!node.is_dir) return node.content;
  json out = json::object();
  for (const auto& [name, child] : node.children) out[name] = node_to_json(child);
  return out;
}

std::unique_ptr<FsEnv> FsEnv::from_json(const json& fixture) {
  std::map<std::string, Node> fixtures;
  for (const auto& [name, tree] : fixture.at("fixtures").items()) fixtures.emplace(name, node_from_json(tree));
  std::vector<ToolDoc> tools;
  for (const auto& t : fixture.at("tools")) {
    tools.push_back({t.at("name").get<std::string>(), t.at("description").get<std::string>(),
                     ojson::parse(t.at("parameters").dump()), ojson::parse(t.at("response").dump())});
  }
  return std::make_unique<FsEnv>(std::move(fixtures), std::move(tools), fixture.at("description").get<std::string>(),
                                 parse_tasks(fixture.at("tasks")));
}

std::unique_ptr<Environment> FsEnv::fresh() const {
  return std::make_unique<FsEnv>(fixtures_, tools_, description_, tasks_);
}

std::string FsEnv::render_tools() const {
  std::string out;
  for (const auto& t : tools_) {
    ojson doc;
    doc["name"] = t.name;
    doc["description"] = t.description;
    doc["parameters"] = t.parameters;
    doc["response"] = t.response;
    out += doc.dump() + "\n";
  }
  return out;
}

const FsEnv::Node* find_node(const FsEnv::Node& root, const std::string& path) {
  const FsEnv::Node* node = &root;
  for (const auto& part : split_path(path)) {
    if (!node->is_dir) return nullptr;
    auto it = node->children.find(part);
    if (it == node->children.end()) return nullptr;
    node = &it->second;
  }
  return node;
}

FsEnv::Node& FsEnv::cwd_node() {
  Node* node = &root_;
  for (const auto& part : cwd_) node = &node->children.at(part);
  return *node;
}

std::string FsEnv::cwd_string() const {
  std::string out = std::string("/") + kRootName;
  for (const auto& part : cwd_) out += "/" + part;
  return out;
}

json FsEnv::snapshot() const {
  return json{{"cwd", cwd_string()},
              {"pending_rm", pending_rm_ ? json(*pending_rm_) : json(nullptr)},
              {"tree", node_to_json(root_)}};
}

Observation FsEnv::reset(const TaskSpec& task, std::uint64_t /*seed*/) {
  task_ = &this->task(task.id);
  auto it = fixtures_.find(task_->fixture);
  if (it == fixtures_.end()) throw FormatError("task " + task.id + " names unknown fixture " + task_->fixture);
  root_ = it->second;
  cwd_.clear();
  pending_rm_.reset();
  turn_ = 0;
  active_ = true;
  std::string unused;
  Observation obs;
  obs.text = call(FunctionCall{"ls", {}}, unused);
  obs.structured = snapshot();
  return obs;
}

std::string FsEnv::call(const FunctionCall& fc, std::string& invalid) {
  const ToolDoc* doc = nullptr;
  for (const auto& t : tools_) {
    if (t.name == fc.name) doc = &t;
  }
  if (!doc) {
    invalid = "unknown function '" + fc.name + "'";
    return {};
  }
  const auto& props = doc->parameters.value("properties", ojson::object());
  for (const auto& [key, value] : fc.args) {
    if (!props.contains(key)) {
      invalid = fc.name + "() got an unexpected argument '" + key + "'";
      return {};
    }
    const bool null_default = value.is_null() && props[key].contains("default") && props[key]["default"].is_null();
    if (!null_default && !type_matches(json::parse(value.dump()), props[key].value("type", ""))) {
      invalid = fc.name + "() argument '" + key + "' must be of type " + props[key].value("type", "");
      return {};
    }
  }
  for (const auto& req : doc->parameters.value("required", ojson::array())) {
    if (!fc.arg(req.get<std::string>())) {
      invalid = fc.name + "() missing required argument '" + req.get<std::string>() + "'";
      return {};
    }
  }
  auto str_arg = [&](const char* key, std::string fallback = {}) {
    const json* v = fc.arg(key);
    return v ? v->get<std::string>() : fallback;
  };

  std::optional<std::string> pending = std::move(pending_rm_);
  pending_rm_.reset();
  Node& cwd = cwd_node();

  if (fc.name == "ls") {
    const json* a = fc.arg("a");
    const bool all = a && a->get<bool>();
    ojson names = ojson::array();
    for (const auto& [name, child] : cwd.children) {
      if (all || name.front() != '.') names.push_back(name);
    }
    return respond(ojson{{"current_directory_content", names}});
  }
  if (fc.name == "pwd") return respond(ojson{{"current_working_directory", cwd_string()}});
  if (fc.name == "cd") {
    const std::string folder = str_arg("folder");
    std::vector<std::string> target = cwd_;
    for (const auto& part : split_path(folder)) {
      if (part == "..") {
        if (target.empty()) return error_response("cd: ..: already at the workspace root");
        target.pop_back();
        continue;
      }
      target.push_back(part);
      const Node* n = &root_;
      for (const auto& p : target) {
        auto it = n->children.find(p);
        if (!n->is_dir || it == n->children.end()) {
          return error_response("cd: " + folder + ": No such directory");
        }
        n = &it->second;
      }
      if (!n->is_dir) return error_response("cd: " + folder + ": Not a directory");
    }
    if (split_path(folder).empty()) return error_response("cd: missing folder name");
    cwd_ = std::move(target);
    return respond(ojson{{"current_working_directory", cwd_string()}});
  }

  const bool is_name_tool = fc.name == "mkdir" || fc.name == "touch" || fc.name == "cat" || fc.name == "wc" ||
                            fc.name == "rm" || (fc.name == "echo" && fc.arg("file_name") && !fc.arg("file_name")->is_null());
  std::string name = fc.name == "mkdir" ? str_arg("dir_name") : (is_name_tool ? str_arg("file_name") : std::string{});
  if (is_name_tool && (name.empty() || name.find('/') != std::string::npos || name == "." || name == "..")) {
    return error_response(fc.name + ": cannot use '" + name + "': Invalid character");
  }
  auto existing = cwd.children.find(name);
  const bool exists = is_name_tool && existing != cwd.children.end();

  if (fc.name == "mkdir") {
    if (exists) return error_response("mkdir: cannot create directory '" + name + "': File exists");
    cwd.children.emplace(name, Node{});
    return "None";
  }
  if (fc.name == "touch") {
    if (exists) return error_response("touch: cannot touch '" + name + "': File exists");
    cwd.children.emplace(name, Node{false, "", {}});
    return "None";
  }
  if (fc.name == "echo") {
    const std::string content = str_arg("content");
    if (!is_name_tool) return respond(ojson{{"terminal_output", content}});
    if (exists && existing->second.is_dir) return error_response("echo: " + name + ": Is a directory");
    cwd.children[name] = Node{false, content, {}};
    return "None";
  }
  if (fc.name == "cat" || fc.name == "wc") {
    if (!exists) return error_response(fc.name + ": " + name + ": No such file or directory");
    if (existing->second.is_dir) return error_response(fc.name + ": " + name + ": Is a directory");
    const std::string& content = existing->second.content;
    if (fc.name == "cat") return respond(ojson{{"file_content", content}});
    const std::string mode = str_arg("mode", "l");
    if (mode == "l") return respond(ojson{{"count", count_lines(content)}, {"type", "lines"}});
    if (mode == "w") return respond(ojson{{"count", count_words(content)}, {"type", "words"}});
    if (mode == "c") return respond(ojson{{"count", content.size()}, {"type", "characters"}});
    return error_response("wc: invalid mode '" + mode + "'; use 'l', 'w' or 'c'");
  }
  if (fc.name == "rm") {
    if (!exists) return error_response("rm: cannot remove '" + name + "': No such file or directory");
    const std::string key = cwd_string() + "/" + name;
    if (existing->second.is_dir && !existing->second.children.empty()) {
      if (pending && *pending == key) {
        cwd.children.erase(existing);
        return respond(ojson{{"result", "'" + name + "' and its contents removed"}});
      }
      pending_rm_ = key;
      return respond(ojson{{"result", "rm: '" + name + "' is a non-empty directory; removal pending confirmation"}});
    }
    cwd.children.erase(existing);
    return respond(ojson{{"result", "'" + name + "' removed"}});
  }
  invalid = "function '" + fc.name + "' is documented but not implemented";
  return {};
}

StepResult FsEnv::step(const Action& action) {
  if (!active_) throw LifecycleError("step called on an inactive file-system episode");
  StepResult result;
  if (const auto* stop = std::get_if<StopAction>(&action.parsed)) {
    (void)stop;
    pending_rm_.reset();
    if (turn_ + 1 < task_->turns.size()) {
      ++turn_;
      result.next_user_query = task_->turns[turn_];
      result.outcome = StepOutcome::Ok;
    } else {
      active_ = false;
      result.outcome = StepOutcome::Terminal;
    }
    result.observation.structured = snapshot();
    return result;
  }
  std::string invalid;
  std::string text;
  if (const auto* bad = std::get_if<InvalidAction>(&action.parsed)) {
    invalid = bad->reason;
  } else if (const auto* fc = std::get_if<FunctionCall>(&action.parsed)) {
    text = call(*fc, invalid);
  } else {
    invalid = "web actions are not available; call one of the documented functions";
  }
  if (!invalid.empty()) {
    pending_rm_.reset();
    text = error_response(invalid);
    result.outcome = StepOutcome::InvalidAction;
  }
  result.observation.text = std::move(text);
  result.observation.structured = snapshot();
  return result;
}

bool FsEnv::evaluate(const TaskSpec& task, const Trajectory& trajectory) const {
  if (!trajectory.terminated) return false;
  const json& state = trajectory.final_state;
  if (!state.is_object() || !state.contains("tree")) return false;
  const Node root = node_from_json(state["tree"]);
  for (const auto& check : task.success) {
    if (check.contains("answer")) {
      if (!trajectory.answer) return false;
      if (normalize_whitespace(*trajectory.answer) != normalize_whitespace(check["answer"].get<std::string>())) {
        return false;
      }
    } else if (check.contains("exists")) {
      if (!find_node(root, check["exists"].get<std::string>())) return false;
    } else if (check.contains("absent")) {
      if (find_node(root, check["absent"].get<std::string>())) return false;
    } else if (check.contains("is_dir")) {
      const Node* n = find_node(root, check["is_dir"].get<std::string>());
      if (!n || !n->is_dir) return false;
    } else if (check.contains("is_file")) {
      const Node* n = find_node(root, check["is_file"].get<std::string>());
      if (!n || n->is_dir) return false;
    } else if (check.contains("content")) {
      const auto& c = check["content"];
      const Node* n = find_node(root, c.at("path").get<std::string>());
      if (!n || n->is_dir || n->content != c.at("equals").get<std::string>()) return false;
    } else if (check.contains("cwd")) {
      if (state.value("cwd", "") != check["cwd"].get<std::string>()) return false;
    } else {
      throw FormatError("unknown file-system success check: " + check.dump());
    }
  }
  return true;
}

}  // namespace tta::env
