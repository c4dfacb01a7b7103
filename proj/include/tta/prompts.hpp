#pragma once

#include <map>
#include <string>

namespace tta::prompts {

// Templates from prompts/*.txt keyed by file stem, embedded at build time.
const std::map<std::string, std::string>& all();

// ConfigError if no template has this name.
const std::string& get(const std::string& name);

}  // namespace tta::prompts
