#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "dtwin/geometry.hpp"

namespace dtwin {

using json = nlohmann::json;

void to_json(json& j, const Vec3& v);
void from_json(const json& j, Vec3& v);
void to_json(json& j, const Transform& t);
void from_json(const json& j, Transform& t);

/// Reads and parses a JSON file; IoError if unreadable, ValidationError if malformed.
json read_json_file(const std::filesystem::path& path);
/// Writes atomically (temp file then rename) so failures never leave partial output.
void write_text_file(const std::filesystem::path& path, const std::string& text);
void write_json_file(const std::filesystem::path& path, const json& j, bool pretty = true);

}  // namespace dtwin
