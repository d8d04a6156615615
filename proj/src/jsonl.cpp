#include "narratekg/jsonl.hpp"

#include "narratekg/error.hpp"

namespace narratekg::jsonl {

void for_each_record(std::istream& in, const std::function<void(const Json&, int)>& fn) {
    std::string text;
    int line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        if (text.find_first_not_of(" \t") == std::string::npos) continue;
        Json rec;
        try {
            rec = Json::parse(text);
        } catch (const Json::parse_error& e) {
            throw SchemaError(std::string("malformed record: ") + e.what(), line);
        }
        if (!rec.is_object()) throw SchemaError("record must be a JSON object", line);
        fn(rec, line);
    }
}

std::string require_string(const Json& rec, const char* key, int line) {
    auto it = rec.find(key);
    if (it == rec.end()) throw SchemaError(std::string("missing field '") + key + "'", line);
    if (!it->is_string()) throw SchemaError(std::string("field '") + key + "' must be a string", line);
    return it->get<std::string>();
}

std::optional<std::string> optional_string(const Json& rec, const char* key, int line) {
    auto it = rec.find(key);
    if (it == rec.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw SchemaError(std::string("field '") + key + "' must be a string", line);
    return it->get<std::string>();
}

std::vector<std::string> require_string_list(const Json& rec, const char* key, int line) {
    if (!rec.contains(key)) throw SchemaError(std::string("missing field '") + key + "'", line);
    return optional_string_list(rec, key, line);
}

std::vector<std::string> optional_string_list(const Json& rec, const char* key, int line) {
    auto it = rec.find(key);
    if (it == rec.end() || it->is_null()) return {};
    if (!it->is_array()) throw SchemaError(std::string("field '") + key + "' must be a list of strings", line);
    std::vector<std::string> out;
    for (const auto& v : *it) {
        if (!v.is_string()) throw SchemaError(std::string("field '") + key + "' must be a list of strings", line);
        out.push_back(v.get<std::string>());
    }
    return out;
}

}  // namespace narratekg::jsonl
