#include "aerocue/http_client.hpp"

#include <httplib.h>

namespace aerocue {

namespace {

// Splits "http://host:port/prefix" into the client origin and the path prefix.
std::pair<std::string, std::string> split_base(const std::string& base_url) {
  const auto scheme = base_url.find("://");
  const std::size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = base_url.find('/', host_start);
  if (slash == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, slash), prefix};
}

}  // namespace

HttpResult http_post_json(const std::string& base_url, const std::string& path, const std::string& body,
                          const HttpHeaders& headers, std::chrono::milliseconds timeout) {
  HttpResult out;
  const auto [origin, prefix] = split_base(base_url);
  httplib::Client client(origin);
  if (!client.is_valid()) {
    out.failure = HttpResult::Failure::connect;
    out.error = "invalid url " + base_url;
    return out;
  }
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(prefix + path, h, body, "application/json");
  if (!res) {
    const auto err = res.error();
    out.error = httplib::to_string(err);
    switch (err) {
      case httplib::Error::Connection:
      case httplib::Error::ConnectionTimeout:
        out.failure = err == httplib::Error::ConnectionTimeout ? HttpResult::Failure::timeout
                                                               : HttpResult::Failure::connect;
        break;
      case httplib::Error::Read:
      case httplib::Error::Write:
        out.failure = HttpResult::Failure::timeout;
        break;
      default:
        out.failure = HttpResult::Failure::io;
        break;
    }
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  return out;
}

}  // namespace aerocue
