#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

namespace aerocue {

struct HttpResult {
  enum class Failure { none, connect, timeout, io };
  Failure failure = Failure::none;
  int status = 0;
  std::string body;
  std::string error;  // transport error text when failure != none

  bool ok() const noexcept { return failure == Failure::none && status >= 200 && status < 300; }
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

// POST a JSON body to base_url + path. `base_url` is "http://host[:port][/prefix]".
// Never throws for transport problems; they come back in `failure`.
HttpResult http_post_json(const std::string& base_url, const std::string& path, const std::string& body,
                          const HttpHeaders& headers, std::chrono::milliseconds timeout);

}  // namespace aerocue
