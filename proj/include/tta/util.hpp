#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace tta {

std::uint64_t fnv1a64(std::string_view text);
std::string hex64(std::uint64_t value);

std::string trim(std::string_view s);
// Trim and collapse internal whitespace runs to one space.
std::string normalize_whitespace(std::string_view s);
std::string to_lower(std::string_view s);
bool contains(std::string_view haystack, std::string_view needle);

// Replaces ${KEY} placeholders. Unknown placeholders are left as-is.
std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// Root of the bundled data/ directory: $TTA_DATA_DIR if set, otherwise the
// path baked in at configure time.
std::filesystem::path data_dir();

}  // namespace tta
