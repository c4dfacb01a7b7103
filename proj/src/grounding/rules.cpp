#include "tta/grounding/rules.hpp"

#include <set>

#include "tta/errors.hpp"
#include "tta/util.hpp"

namespace tta::grounding {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

ojson to_json(const DynamicsRule& rule) {
  ojson j;
  j["initial_state"] = rule.initial_state;
  j["action"] = rule.action;
  j["environmental_dynamics"] = rule.environmental_dynamics;
  return j;
}

DynamicsRule rule_from_json(const json& j) {
  if (!j.is_object()) throw RuleSetError("rule must be a JSON object");
  auto field = [&](const char* name, const char* alias = nullptr) {
    const json* v = nullptr;
    if (j.contains(name)) v = &j[name];
    else if (alias && j.contains(alias)) v = &j[alias];
    if (!v) throw RuleSetError(std::string("rule is missing field ") + name);
    if (!v->is_string() || v->get<std::string>().empty()) {
      throw RuleSetError(std::string("rule field ") + name + " must be a nonempty string");
    }
    return v->get<std::string>();
  };
  return DynamicsRule{field("initial_state"), field("action", "action_taken"), field("environmental_dynamics")};
}

ojson to_json(const RuleSet& rs) {
  ojson j;
  j["env"] = rs.env;
  j["provenance"] = {{"extractor", rs.provenance.extractor},
                     {"episodes", rs.provenance.episodes},
                     {"filtered", rs.provenance.filtered}};
  j["rules"] = ojson::array();
  for (const auto& r : rs.rules) j["rules"].push_back(to_json(r));
  return j;
}

RuleSet ruleset_from_json(const json& j) {
  RuleSet rs;
  const json* rules = &j;
  if (j.is_object()) {
    try {
      rs.env = j.at("env").get<std::string>();
      const auto& p = j.at("provenance");
      rs.provenance.extractor = p.at("extractor").get<std::string>();
      rs.provenance.episodes = p.at("episodes").get<int>();
      rs.provenance.filtered = p.at("filtered").get<bool>();
      rules = &j.at("rules");
    } catch (const json::exception& e) {
      throw RuleSetError(std::string("rule set: ") + e.what());
    }
  }
  if (!rules->is_array()) throw RuleSetError("rules must be a JSON array");
  for (const auto& r : *rules) rs.rules.push_back(rule_from_json(r));
  validate(rs);
  return rs;
}

void validate(const RuleSet& rs) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& r : rs.rules) {
    if (r.initial_state.empty() || r.action.empty() || r.environmental_dynamics.empty()) {
      throw RuleSetError("rule fields must be nonempty");
    }
    if (rs.provenance.filtered && !seen.insert({r.initial_state, r.action}).second) {
      throw RuleSetError("filtered rule set repeats (initial_state, action): " + r.initial_state + " / " + r.action);
    }
  }
}

void save_rules(const RuleSet& rs, const std::filesystem::path& path) {
  validate(rs);
  write_file(path, to_json(rs).dump(2) + "\n");
}

RuleSet load_rules(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw RuleSetError(path.string() + ": " + e.what());
  }
  return ruleset_from_json(j);
}

std::string render_rules(const std::vector<DynamicsRule>& rules) {
  std::string out;
  for (const auto& r : rules) {
    if (!out.empty()) out += '\n';
    out += to_json(r).dump();
  }
  return out;
}

}  // namespace tta::grounding
