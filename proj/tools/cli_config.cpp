#include "cli_config.hpp"

#include <fstream>
#include <sstream>

#include "aerocue/error.hpp"

extern char** environ;

namespace aerocue::cli {

namespace {

enum class Kind { text, integer, boolean };

struct EnvVar {
  const char* name;
  const char* path;  // JSON pointer into the patch
  Kind kind;
  const char* help;
};

const EnvVar kEnv[] = {
    {"TASK", "/task", Kind::text, "task id"},
    {"SCENARIO", "/scenario", Kind::text, "scenario name or file"},
    {"BACKEND", "/backend", Kind::text, "oracle | remote"},
    {"BASE_URL", "/remote/base_url", Kind::text, "chat backend endpoint"},
    {"MODEL", "/remote/model", Kind::text, "chat backend model"},
    {"API_KEY", "/remote/api_key", Kind::text, "chat backend key"},
    {"TIMEOUT_MS", "/remote/timeout_ms", Kind::integer, "chat request timeout"},
    {"EMBED_URL", "/embed/base_url", Kind::text, "embedding endpoint"},
    {"EMBED_MODEL", "/embed/model", Kind::text, "embedding model"},
    {"EMBED_API_KEY", "/embed/api_key", Kind::text, "embedding key"},
    {"DEVICE", "/device", Kind::text, "sim | tcp://host:port"},
    {"SEED", "/seed", Kind::integer, "session seed"},
    {"ASSIST", "/assist", Kind::boolean, "on | off"},
    {"DEADLINE_MS", "/deadline_ms", Kind::integer, "per-tick pipeline deadline"},
    {"EMS_DURATION_MS", "/ems_duration_ms", Kind::integer, "cue duration"},
    {"TICK_MS", "/tick_ms", Kind::integer, "gateway tick pacing"},
    {"PROFILE", "/profile", Kind::text, "calibration profile file"},
    {"INDEX", "/index", Kind::text, "knowledge index file"},
    {"HOST", "/gateway/host", Kind::text, "gateway bind address"},
    {"PORT", "/gateway/port", Kind::integer, "gateway port"},
    {"UI_DIR", "/gateway/ui_dir", Kind::text, "static UI bundle"},
};

Json parse_value(const EnvVar& v, const std::string& raw) {
  const std::string name = std::string(kEnvPrefix) + v.name;
  switch (v.kind) {
    case Kind::text:
      return raw;
    case Kind::integer:
      try {
        std::size_t used = 0;
        const long long n = std::stoll(raw, &used);
        if (used != raw.size()) throw std::invalid_argument(raw);
        return n;
      } catch (const std::exception&) {
        throw Error(Errc::ConfigInvalid, name + " is not an integer: " + raw);
      }
    case Kind::boolean:
      if (raw == "on" || raw == "true" || raw == "1") return true;
      if (raw == "off" || raw == "false" || raw == "0") return false;
      throw Error(Errc::ConfigInvalid, name + " must be on or off: " + raw);
  }
  return {};
}

void merge(Json& into, const Json& from) {
  for (auto it = from.begin(); it != from.end(); ++it) {
    if (it->is_object() && into.contains(it.key()) && into[it.key()].is_object())
      merge(into[it.key()], *it);
    else
      into[it.key()] = *it;
  }
}

void apply_gateway(Settings& s, const Json& patch) {
  auto it = patch.find("gateway");
  if (it == patch.end()) return;
  try {
    s.host = it->value("host", s.host);
    s.port = it->value("port", s.port);
    s.ui_dir = it->value("ui_dir", s.ui_dir);
  } catch (const Json::exception& e) {
    throw Error(Errc::ConfigInvalid, std::string("gateway: ") + e.what());
  }
}

}  // namespace

Patch patch_from_file_json(const Json& file) {
  if (!file.is_object()) throw Error(Errc::ConfigInvalid, "config file must hold a JSON object");
  Patch p = Json::object();
  for (auto it = file.begin(); it != file.end(); ++it) {
    const std::string& key = it.key();
    if (key == "backend") {
      if (!it->is_object()) throw Error(Errc::ConfigInvalid, "backend must be an object");
      Json remote = *it;
      if (auto kind = remote.find("kind"); kind != remote.end()) {
        p["backend"] = *kind;
        remote.erase("kind");
      }
      p["remote"] = remote;
    } else if (key == "embed" || key == "envelope" || key == "gateway") {
      if (!it->is_object()) throw Error(Errc::ConfigInvalid, key + " must be an object");
      p[key] = *it;
    } else if (key == "device") {
      p["device"] = *it;
    } else if (key == "session") {
      if (!it->is_object()) throw Error(Errc::ConfigInvalid, "session must be an object");
      merge(p, *it);
    } else {
      throw Error(Errc::ConfigInvalid, "unknown config key " + key);
    }
  }
  return p;
}

Patch patch_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  Json j = Json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw Error(Errc::ConfigInvalid, path + " is not valid JSON");
  return patch_from_file_json(j);
}

Patch patch_from_env(const std::map<std::string, std::string>& env) {
  Patch p = Json::object();
  for (const EnvVar& v : kEnv) {
    auto it = env.find(std::string(kEnvPrefix) + v.name);
    if (it == env.end()) continue;
    p[Json::json_pointer(v.path)] = parse_value(v, it->second);
  }
  return p;
}

std::map<std::string, std::string> process_env() {
  std::map<std::string, std::string> out;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    const std::string kv = *e;
    if (kv.rfind(kEnvPrefix, 0) != 0) continue;
    const auto eq = kv.find('=');
    if (eq != std::string::npos) out[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return out;
}

const std::vector<std::pair<std::string, std::string>>& env_variables() {
  static const auto vars = [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const EnvVar& v : kEnv) out.emplace_back(std::string(kEnvPrefix) + v.name, v.help);
    return out;
  }();
  return vars;
}

Settings resolve(const Patch& file, const Patch& env, const Patch& flags) {
  Settings s;
  for (const Patch* p : {&file, &env, &flags}) {
    if (p->is_null()) continue;
    Json session = *p;
    session.erase("gateway");
    s.session = config_from_json(session, s.session);
    apply_gateway(s, *p);
  }
  return s;
}

}  // namespace aerocue::cli
