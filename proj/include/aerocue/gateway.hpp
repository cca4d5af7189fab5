#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "aerocue/session_engine.hpp"

namespace httplib {
class Server;
}

namespace aerocue {

struct GatewayOptions {
  std::string host = "127.0.0.1";
  int port = 8080;          // 0 picks a free port
  std::string ui_dir;       // static bundle served at /; empty: none
  SessionConfig defaults;   // starting point for /api/session/start bodies
  int max_control_hz = 20;
};

// HTTP control plane plus a server-sent-event stream of per-tick payloads.
//
//   GET  /api/session          status snapshot
//   POST /api/session/start    body: config overrides; 409 when running
//   POST /api/session/stop     finishes the current tick, then ends the stream
//   POST /api/session/config   replaces the defaults for the next start
//   POST /api/control          {stick_x, stick_y, throttle}, interactive only
//   GET  /api/stream           events: snapshot, tick..., end
class Gateway {
 public:
  // Binds immediately. Throws PortInUse.
  explicit Gateway(GatewayOptions options);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  int port() const noexcept { return port_; }
  // Blocks until shutdown() is called from another thread or a signal handler.
  void wait();
  void shutdown();

  // The same operations the endpoints use. Return HTTP-style status codes.
  struct Reply {
    int status = 200;
    Json body;
  };
  Reply start(const Json& overrides);
  Reply stop();
  Reply configure(const Json& body);
  Reply control(const Json& body);
  Json status() const;

 private:
  struct Hub {
    mutable std::mutex mu;
    std::condition_variable cv;
    std::uint64_t session_id = 0;
    bool running = false;
    std::vector<std::string> events;  // SSE frames of the current session
    std::int64_t last_tick = 0;
    SessionConfig config;
  };

  void session_loop(SessionConfig config, std::shared_ptr<SessionRuntime> runtime, std::uint64_t id);
  void publish(std::uint64_t id, std::string frame, std::int64_t tick);

  GatewayOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread listener_;
  int port_ = 0;
  std::atomic<bool> closing_{false};

  Hub hub_;
  std::mutex control_mu_;
  std::optional<ControlInput> pending_control_;
  std::chrono::steady_clock::time_point last_control_{};
  std::atomic<bool> stop_requested_{false};
  std::thread session_thread_;
  std::mutex session_mu_;  // serializes start/stop
};

// "event: <name>\ndata: <json>\n\n"
std::string sse_frame(std::string_view event, const Json& data);

}  // namespace aerocue
