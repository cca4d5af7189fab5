#pragma once

#include <map>
#include <optional>
#include <string>

#include "aerocue/session_engine.hpp"

namespace aerocue::cli {

inline constexpr std::string_view kEnvPrefix = "AEROCUE_";

// Everything a subcommand can be configured with.
struct Settings {
  SessionConfig session;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string ui_dir;
};

// A partial override in session-config JSON shape (see config_from_json) plus
// an optional "gateway" object {host, port, ui_dir}.
using Patch = Json;

// Config file layout:
//   {"backend": {"kind", "base_url", "model", "api_key", "timeout_ms", "max_retries"},
//    "embed": {"base_url", "model", "api_key"},
//    "device": "sim" | "tcp://host:port",
//    "gateway": {"host", "port", "ui_dir"},
//    "envelope": {"constant_level", "floor", "span", "light_scale", "firm_scale", "sample_rate_hz"},
//    "session": {<any session-config key>}}
// Throws ConfigInvalid on unknown top-level keys or wrong types.
Patch patch_from_file_json(const Json& file);
// Throws Io, ConfigInvalid.
Patch patch_from_file(const std::string& path);

// AEROCUE_* variables. Throws ConfigInvalid on unparsable values.
Patch patch_from_env(const std::map<std::string, std::string>& env);
std::map<std::string, std::string> process_env();

// Variable name -> what it sets. Used for --help text and the README.
const std::vector<std::pair<std::string, std::string>>& env_variables();

// default < file < env < flags. Does not validate.
Settings resolve(const Patch& file, const Patch& env, const Patch& flags);

}  // namespace aerocue::cli
