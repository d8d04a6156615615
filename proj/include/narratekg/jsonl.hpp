#pragma once

// Helpers shared by the line-delimited JSON readers (KG, corpus, logs).

#include <json.hpp>

#include <functional>
#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace narratekg::jsonl {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

/// Calls `fn(record, line)` for every nonblank line. Malformed JSON or a
/// non-object line raises SchemaError with the line number.
void for_each_record(std::istream& in, const std::function<void(const Json&, int)>& fn);

std::string require_string(const Json& rec, const char* key, int line);
std::optional<std::string> optional_string(const Json& rec, const char* key, int line);
std::vector<std::string> require_string_list(const Json& rec, const char* key, int line);
std::vector<std::string> optional_string_list(const Json& rec, const char* key, int line);

}  // namespace narratekg::jsonl
