#include "aerocue/device.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "aerocue/error.hpp"

namespace aerocue {

namespace {

bool write_all(int fd, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
    if (w < 0 && errno == EINTR) continue;
    if (w <= 0) return false;
    data += w;
    n -= static_cast<std::size_t>(w);
  }
  return true;
}

// Reads exactly n bytes unless the peer closes, an error occurs, or
// `timeout_ms` (negative: none) passes without data.
std::size_t read_all(int fd, std::uint8_t* data, std::size_t n, int timeout_ms) {
  std::size_t got = 0;
  while (got < n) {
    pollfd p{fd, POLLIN, 0};
    const int rc = ::poll(&p, 1, timeout_ms);
    if (rc < 0 && errno == EINTR) continue;
    if (rc <= 0) break;
    const ssize_t r = ::recv(fd, data + got, n - got, 0);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) break;
    got += static_cast<std::size_t>(r);
  }
  return got;
}

std::pair<std::string, int> split_host_port(const std::string& hp) {
  const auto colon = hp.rfind(':');
  if (colon == std::string::npos) throw Error(Errc::ConfigInvalid, "device address needs host:port: " + hp);
  try {
    return {hp.substr(0, colon), std::stoi(hp.substr(colon + 1))};
  } catch (const std::exception&) {
    throw Error(Errc::ConfigInvalid, "bad device port: " + hp);
  }
}

}  // namespace

std::optional<DeviceAck> SimulatedDevice::send(const DeviceFrame& frame) {
  auto ack = device_ack(frame);
  if (ack) frames_.push_back(frame);
  return ack;
}

TcpDeviceLink::TcpDeviceLink(const std::string& address, std::chrono::milliseconds ack_timeout)
    : address_(address), ack_timeout_(ack_timeout) {
  constexpr std::string_view scheme = "tcp://";
  if (address.rfind(scheme, 0) != 0) throw Error(Errc::ConfigInvalid, "device address must start with tcp://");
  const auto [host, port] = split_host_port(address.substr(scheme.size()));

  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || res == nullptr)
    throw Error(Errc::DeviceUnavailable, "cannot resolve " + host);
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      fd_ = fd;
      break;
    }
    ::close(fd);
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) throw Error(Errc::DeviceUnavailable, "no device listening at " + address);
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

TcpDeviceLink::~TcpDeviceLink() {
  if (fd_ >= 0) ::close(fd_);
}

std::optional<DeviceAck> TcpDeviceLink::send(const DeviceFrame& frame) {
  if (!write_all(fd_, frame.data(), frame.size())) throw Error(Errc::DeviceUnavailable, "device link closed");
  DeviceAck ack{};
  if (read_all(fd_, ack.data(), ack.size(), static_cast<int>(ack_timeout_.count())) != ack.size())
    return std::nullopt;
  if (ack[0] != kAckByte || ack[1] != crc8(frame)) return std::nullopt;
  return ack;
}

std::unique_ptr<DeviceLink> open_device(const std::string& address) {
  if (address.empty() || address == "sim") return std::make_unique<SimulatedDevice>();
  return std::make_unique<TcpDeviceLink>(address);
}

DeviceServer::DeviceServer(const std::string& host, int port) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(Errc::Io, "socket failed");
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw Error(Errc::ConfigInvalid, "bad listen address " + host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 4) != 0) {
    ::close(listen_fd_);
    throw Error(Errc::PortInUse, host + ":" + std::to_string(port));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  thread_ = std::thread([this] { serve(); });
}

DeviceServer::~DeviceServer() { stop(); }

void DeviceServer::stop() {
  if (running_.exchange(false)) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    if (thread_.joinable()) thread_.join();
    ::close(listen_fd_);
  }
}

void DeviceServer::serve() {
  // One client at a time; the session is the only writer.
  while (running_) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 100) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    while (running_) {
      DeviceFrame frame{};
      const std::size_t got = read_all(fd, frame.data(), frame.size(), 100);
      if (got == 0) {
        pollfd q{fd, POLLIN, 0};
        if (::poll(&q, 1, 0) > 0) {
          std::uint8_t probe;
          if (::recv(fd, &probe, 1, MSG_PEEK) <= 0) break;  // peer closed
        }
        continue;
      }
      if (got < frame.size()) {
        // Finish a frame that straddled the poll interval.
        const std::size_t rest = read_all(fd, frame.data() + got, frame.size() - got, 1000);
        if (got + rest < frame.size()) break;
      }
      if (auto ack = device_ack(frame)) {
        ++acked_;
        if (!write_all(fd, ack->data(), ack->size())) break;
      } else {
        ++dropped_;
      }
    }
    ::close(fd);
  }
}

std::string frame_hex(const DeviceFrame& frame) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (auto b : frame) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xF]);
  }
  return out;
}

}  // namespace aerocue
