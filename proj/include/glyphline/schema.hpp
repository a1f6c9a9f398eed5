#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace glyphline {

namespace detail {

inline bool schema_type_matches(const nlohmann::json& doc, const std::string& type) {
    if (type == "object") return doc.is_object();
    if (type == "array") return doc.is_array();
    if (type == "string") return doc.is_string();
    if (type == "integer") return doc.is_number_integer() || doc.is_number_unsigned();
    if (type == "number") return doc.is_number();
    if (type == "boolean") return doc.is_boolean();
    if (type == "null") return doc.is_null();
    return false;
}

inline void validate_schema_at(const nlohmann::json& doc, const nlohmann::json& schema,
                               const std::string& path, std::vector<std::string>& errors) {
    if (schema.contains("type")) {
        const std::string type = schema.at("type").get<std::string>();
        if (!schema_type_matches(doc, type)) {
            errors.push_back(path + ": expected " + type + ", got " + doc.type_name());
            return;  // deeper checks would just cascade
        }
    }
    if (schema.contains("enum")) {
        bool hit = false;
        for (const auto& v : schema.at("enum"))
            if (v == doc) hit = true;
        if (!hit) errors.push_back(path + ": value not in enum");
    }
    if (schema.contains("minimum") && doc.is_number()) {
        if (doc.get<double>() < schema.at("minimum").get<double>())
            errors.push_back(path + ": below minimum " + schema.at("minimum").dump());
    }
    if (doc.is_object()) {
        if (schema.contains("required"))
            for (const auto& key : schema.at("required"))
                if (!doc.contains(key.get<std::string>()))
                    errors.push_back(path + ": missing required key '" + key.get<std::string>() + "'");
        if (schema.contains("properties")) {
            const auto& props = schema.at("properties");
            for (auto it = props.begin(); it != props.end(); ++it)
                if (doc.contains(it.key()))
                    validate_schema_at(doc.at(it.key()), it.value(), path + "." + it.key(), errors);
            if (schema.value("additionalProperties", true) == false)
                for (auto it = doc.begin(); it != doc.end(); ++it)
                    if (!props.contains(it.key()))
                        errors.push_back(path + ": unexpected key '" + it.key() + "'");
        }
    }
    if (doc.is_array() && schema.contains("items")) {
        const auto& item_schema = schema.at("items");
        for (std::size_t i = 0; i < doc.size(); ++i)
            validate_schema_at(doc[i], item_schema, path + "[" + std::to_string(i) + "]", errors);
    }
}

}  // namespace detail

/// Validates `doc` against a schema written in the JSON-Schema subset used by
/// the shipped schemas: type, properties, required, additionalProperties,
/// items, enum, minimum. Returns human-readable problems; empty means valid.
inline std::vector<std::string> validate_schema(const nlohmann::json& doc,
                                                const nlohmann::json& schema) {
    std::vector<std::string> errors;
    detail::validate_schema_at(doc, schema, "$", errors);
    return errors;
}

}  // namespace glyphline
