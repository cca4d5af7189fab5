#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aerocue {

// Files under resources/ are compiled into the library. When the environment
// variable AEROCUE_RESOURCE_DIR is set, a file found there takes precedence,
// so prompts, schemas and task specs can be edited without rebuilding.
std::optional<std::string> find_resource(std::string_view relative_path);
// Throws Error(Io) when missing.
std::string load_resource(std::string_view relative_path);
// Relative paths of embedded resources under `prefix`, sorted.
std::vector<std::string> list_resources(std::string_view prefix);

// Embedded table, generated at build time.
struct EmbeddedResource {
  const char* path;
  const char* data;
  std::size_t size;
};
std::vector<EmbeddedResource> embedded_resources();

}  // namespace aerocue
