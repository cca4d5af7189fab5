#include "aerocue/resources.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "aerocue/error.hpp"

namespace aerocue {

std::optional<std::string> find_resource(std::string_view relative_path) {
  if (const char* dir = std::getenv("AEROCUE_RESOURCE_DIR"); dir != nullptr && *dir != '\0') {
    std::filesystem::path p = std::filesystem::path(dir) / std::string(relative_path);
    if (std::ifstream in{p, std::ios::binary}) {
      std::ostringstream ss;
      ss << in.rdbuf();
      return ss.str();
    }
  }
  for (const auto& r : embedded_resources()) {
    if (relative_path == r.path) return std::string(r.data, r.size);
  }
  return std::nullopt;
}

std::string load_resource(std::string_view relative_path) {
  auto found = find_resource(relative_path);
  if (!found) throw Error(Errc::Io, "missing resource " + std::string(relative_path));
  return std::move(*found);
}

std::vector<std::string> list_resources(std::string_view prefix) {
  std::vector<std::string> out;
  for (const auto& r : embedded_resources()) {
    std::string_view p{r.path};
    if (p.substr(0, prefix.size()) == prefix) out.emplace_back(p);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace aerocue
