#include "aerocue/schema.hpp"

#include <algorithm>
#include <cmath>

namespace aerocue {

namespace {

bool type_matches(std::string_view type, const Json& v) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  if (type == "number") return v.is_number();
  if (type == "integer") {
    if (v.is_number_integer()) return true;
    if (v.is_number_float()) {
      const double d = v.get<double>();
      return std::isfinite(d) && d == std::floor(d);
    }
    return false;
  }
  return false;
}

void check(const Json& schema, const Json& v, const std::string& path, std::vector<std::string>& out) {
  if (!schema.is_object()) return;

  if (auto it = schema.find("type"); it != schema.end()) {
    bool ok = false;
    if (it->is_string()) {
      ok = type_matches(it->get<std::string>(), v);
    } else if (it->is_array()) {
      for (const auto& t : *it) ok = ok || (t.is_string() && type_matches(t.get<std::string>(), v));
    }
    if (!ok) {
      out.push_back(path + ": expected type " + it->dump());
      return;
    }
  }

  if (auto it = schema.find("enum"); it != schema.end() && it->is_array()) {
    if (std::find(it->begin(), it->end(), v) == it->end()) out.push_back(path + ": value not in enum");
  }

  if (v.is_object()) {
    if (auto it = schema.find("required"); it != schema.end()) {
      for (const auto& key : *it) {
        if (!v.contains(key.get<std::string>())) out.push_back(path + ": missing " + key.get<std::string>());
      }
    }
    const auto props = schema.find("properties");
    const auto extra = schema.find("additionalProperties");
    for (const auto& [key, child] : v.items()) {
      if (props != schema.end() && props->contains(key)) {
        check(props->at(key), child, path + "/" + key, out);
      } else if (extra != schema.end() && extra->is_boolean() && !extra->get<bool>()) {
        out.push_back(path + ": unexpected property " + key);
      }
    }
  }

  if (v.is_array()) {
    if (auto it = schema.find("minItems"); it != schema.end() && v.size() < it->get<std::size_t>())
      out.push_back(path + ": too few items");
    if (auto it = schema.find("maxItems"); it != schema.end() && v.size() > it->get<std::size_t>())
      out.push_back(path + ": too many items");
    if (auto it = schema.find("items"); it != schema.end()) {
      for (std::size_t i = 0; i < v.size(); ++i) check(*it, v[i], path + "/" + std::to_string(i), out);
    }
  }

  if (v.is_number()) {
    const double d = v.get<double>();
    if (auto it = schema.find("minimum"); it != schema.end() && d < it->get<double>())
      out.push_back(path + ": below minimum");
    if (auto it = schema.find("maximum"); it != schema.end() && d > it->get<double>())
      out.push_back(path + ": above maximum");
  }

  if (v.is_string()) {
    if (auto it = schema.find("minLength"); it != schema.end() && v.get_ref<const std::string&>().size() < it->get<std::size_t>())
      out.push_back(path + ": string too short");
  }
}

}  // namespace

std::vector<std::string> schema_errors(const Json& schema, const Json& value) {
  std::vector<std::string> out;
  check(schema, value, "", out);
  return out;
}

}  // namespace aerocue
