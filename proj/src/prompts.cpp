#include "tta/prompts.hpp"

#include "tta/errors.hpp"

namespace tta::prompts {

const std::string& get(const std::string& name) {
  const auto& table = all();
  auto it = table.find(name);
  if (it == table.end()) throw ConfigError("no prompt template named '" + name + "'");
  return it->second;
}

}  // namespace tta::prompts
