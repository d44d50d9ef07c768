#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "hoisynth/core/error.hpp"

namespace hoisynth {

/// Validator for the JSON Schema keywords our schema files use: type,
/// required, properties, additionalProperties (boolean), items, enum,
/// minimum, maximum, exclusiveMinimum and local "#/$defs/..." references.
/// Other keywords are ignored.
class SchemaValidator {
 public:
  explicit SchemaValidator(nlohmann::json schema) : root_(std::move(schema)) {
    require(root_.is_object(), "schema must be a JSON object");
  }

  std::vector<std::string> errors(const nlohmann::json& doc) const {
    std::vector<std::string> out;
    check(root_, doc, "$", out);
    return out;
  }

  void validate(const nlohmann::json& doc) const {
    const auto e = errors(doc);
    if (e.empty()) return;
    std::string msg = "document does not match schema:";
    for (const auto& s : e) msg += "\n  " + s;
    throw FormatError(msg);
  }

 private:
  static bool type_matches(const std::string& t, const nlohmann::json& v) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "boolean") return v.is_boolean();
    if (t == "null") return v.is_null();
    if (t == "integer") return v.is_number_integer();
    if (t == "number") return v.is_number();
    throw InvalidInput("schema uses unknown type '" + t + "'");
  }

  const nlohmann::json& resolve(const nlohmann::json& s) const {
    if (!s.contains("$ref")) return s;
    const std::string ref = s["$ref"].get<std::string>();
    const std::string prefix = "#/$defs/";
    require(ref.rfind(prefix, 0) == 0, "schema reference '" + ref + "' is not local");
    const auto& defs = root_.at("$defs");
    const std::string name = ref.substr(prefix.size());
    require(defs.contains(name), "schema reference '" + ref + "' is undefined");
    return defs[name];
  }

  void check(const nlohmann::json& schema_in, const nlohmann::json& v, const std::string& path,
             std::vector<std::string>& out) const {
    const nlohmann::json& s = resolve(schema_in);
    if (s.contains("type")) {
      bool ok = false;
      if (s["type"].is_array()) {
        for (const auto& t : s["type"]) ok = ok || type_matches(t.get<std::string>(), v);
      } else {
        ok = type_matches(s["type"].get<std::string>(), v);
      }
      if (!ok) {
        out.push_back(path + ": expected type " + s["type"].dump());
        return;
      }
    }
    if (s.contains("enum")) {
      bool found = false;
      for (const auto& e : s["enum"]) found = found || e == v;
      if (!found) out.push_back(path + ": value not in enum");
    }
    if (v.is_number()) {
      const double x = v.get<double>();
      if (s.contains("minimum") && x < s["minimum"].get<double>()) out.push_back(path + ": below minimum");
      if (s.contains("maximum") && x > s["maximum"].get<double>()) out.push_back(path + ": above maximum");
      if (s.contains("exclusiveMinimum") && x <= s["exclusiveMinimum"].get<double>())
        out.push_back(path + ": not above exclusive minimum");
    }
    if (v.is_object()) {
      if (s.contains("required"))
        for (const auto& k : s["required"])
          if (!v.contains(k.get<std::string>())) out.push_back(path + ": missing '" + k.get<std::string>() + "'");
      const bool closed = s.contains("additionalProperties") && s["additionalProperties"] == false;
      for (const auto& [k, child] : v.items()) {
        if (s.contains("properties") && s["properties"].contains(k)) {
          check(s["properties"][k], child, path + "." + k, out);
        } else if (closed) {
          out.push_back(path + ": unexpected '" + k + "'");
        }
      }
    }
    if (v.is_array() && s.contains("items"))
      for (std::size_t i = 0; i < v.size(); ++i) check(s["items"], v[i], path + "[" + std::to_string(i) + "]", out);
  }

  nlohmann::json root_;
};

}  // namespace hoisynth
