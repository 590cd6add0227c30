#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "wwho/schema.hpp"

namespace wwho::detail {

using ojson = nlohmann::ordered_json;

ojson schema_to_json_value(const SchemaDefinition& def);
SchemaDefinition schema_from_json_value(const ojson& doc, std::string_view origin);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

} // namespace wwho::detail
