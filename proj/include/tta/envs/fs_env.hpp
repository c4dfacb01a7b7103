#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tta/envs/environment.hpp"

namespace tta::env {

// In-memory file system exposed through function calls. rm on a non-empty
// directory does not fail and does not delete: it leaves the removal pending
// and only an immediately repeated identical call removes the tree.
class FsEnv final : public Environment {
 public:
  struct Node {
    bool is_dir = true;
    std::string content;
    std::map<std::string, Node> children;

    friend bool operator==(const Node&, const Node&) = default;
  };

  struct ToolDoc {
    std::string name;
    std::string description;
    nlohmann::ordered_json parameters;
    nlohmann::ordered_json response;
  };

  FsEnv(std::map<std::string, Node> fixtures, std::vector<ToolDoc> tools, std::string description,
        std::vector<TaskSpec> tasks);
  static std::unique_ptr<FsEnv> from_json(const nlohmann::json& fixture);

  std::string id() const override { return "fs"; }
  EnvKind kind() const override { return EnvKind::FunctionCalling; }
  const std::vector<TaskSpec>& tasks() const override { return tasks_; }

  using Environment::reset;
  Observation reset(const TaskSpec& task, std::uint64_t seed) override;
  StepResult step(const Action& action) override;
  nlohmann::json snapshot() const override;
  bool evaluate(const TaskSpec& task, const Trajectory& trajectory) const override;
  std::string render_tools() const override;
  std::string description() const override { return description_; }
  std::unique_ptr<Environment> fresh() const override;

  static constexpr const char* kRootName = "workspace";

  static Node node_from_json(const nlohmann::json& j);
  static nlohmann::json node_to_json(const Node& node);

 private:
  Node& cwd_node();
  std::string cwd_string() const;
  // Returns the response text; sets invalid when the call itself is malformed.
  std::string call(const FunctionCall& call, std::string& invalid);

  std::map<std::string, Node> fixtures_;
  std::vector<ToolDoc> tools_;
  std::string description_;
  std::vector<TaskSpec> tasks_;

  Node root_;
  std::vector<std::string> cwd_;
  std::optional<std::string> pending_rm_;
  const TaskSpec* task_ = nullptr;
  std::size_t turn_ = 0;
};

// Resolves a '/'-separated path relative to the root. Null if missing.
const FsEnv::Node* find_node(const FsEnv::Node& root, const std::string& path);

}  // namespace tta::env
