#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "aerocue/ems_control.hpp"

namespace aerocue {

using DeviceAck = std::array<std::uint8_t, 2>;

// Where encoded frames go. One writer (the session) per link.
class DeviceLink {
 public:
  virtual ~DeviceLink() = default;
  // Returns the ack, or nullopt when the device rejected or ignored the frame.
  // Throws DeviceUnavailable when the link is down.
  virtual std::optional<DeviceAck> send(const DeviceFrame& frame) = 0;
  virtual std::string describe() const = 0;
};

// In-process stimulator; keeps every frame it accepted.
class SimulatedDevice final : public DeviceLink {
 public:
  std::optional<DeviceAck> send(const DeviceFrame& frame) override;
  std::string describe() const override { return "sim"; }
  const std::vector<DeviceFrame>& frames() const noexcept { return frames_; }

 private:
  std::vector<DeviceFrame> frames_;
};

// "tcp://host:port". Connects in the constructor; throws DeviceUnavailable.
class TcpDeviceLink final : public DeviceLink {
 public:
  explicit TcpDeviceLink(const std::string& address,
                         std::chrono::milliseconds ack_timeout = std::chrono::milliseconds(200));
  ~TcpDeviceLink() override;
  TcpDeviceLink(const TcpDeviceLink&) = delete;
  TcpDeviceLink& operator=(const TcpDeviceLink&) = delete;

  std::optional<DeviceAck> send(const DeviceFrame& frame) override;
  std::string describe() const override { return address_; }

 private:
  std::string address_;
  std::chrono::milliseconds ack_timeout_;
  int fd_ = -1;
};

// "sim" or "tcp://host:port". Throws DeviceUnavailable / ConfigInvalid.
std::unique_ptr<DeviceLink> open_device(const std::string& address);

// Stimulator simulator on a TCP port: reads 8-byte frames, acks valid ones
// with [0x5A, crc8(frame)], drops invalid ones.
class DeviceServer {
 public:
  // port 0 picks a free port. Throws PortInUse.
  explicit DeviceServer(const std::string& host = "127.0.0.1", int port = 0);
  ~DeviceServer();
  DeviceServer(const DeviceServer&) = delete;
  DeviceServer& operator=(const DeviceServer&) = delete;

  int port() const noexcept { return port_; }
  std::size_t frames_acked() const noexcept { return acked_; }
  std::size_t frames_dropped() const noexcept { return dropped_; }
  void stop();

 private:
  void serve();

  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> running_{true};
  std::atomic<std::size_t> acked_{0};
  std::atomic<std::size_t> dropped_{0};
  std::thread thread_;
};

std::string frame_hex(const DeviceFrame& frame);

}  // namespace aerocue
