#include "aerocue/gateway.hpp"

#include <cmath>
#include <fstream>
#include <httplib.h>

#include "aerocue/error.hpp"

namespace aerocue {

namespace {

using namespace std::chrono_literals;

Json error_body(std::string_view code, const std::string& detail) {
  return {{"error", code}, {"detail", detail}};
}

int status_for(Errc e) {
  switch (e) {
    case Errc::DeviceUnavailable:
    case Errc::ProviderUnavailable:
      return 503;
    case Errc::Io:
    case Errc::InvalidIndexFile:
      return 500;
    default:
      return 400;
  }
}

void send_reply(httplib::Response& res, const Gateway::Reply& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

std::optional<Json> parse_body(const httplib::Request& req, httplib::Response& res) {
  if (req.body.empty()) return Json::object();
  Json j = Json::parse(req.body, nullptr, false);
  if (j.is_discarded()) {
    send_reply(res, {400, error_body("BadRequest", "body is not JSON")});
    return std::nullopt;
  }
  return j;
}

bool number_in(const Json& j, const char* key, double lo, double hi, double& out) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number()) return false;
  out = it->get<double>();
  return std::isfinite(out) && out >= lo && out <= hi;
}

}  // namespace

std::string sse_frame(std::string_view event, const Json& data) {
  std::string out = "event: ";
  out += event;
  out += "\ndata: ";
  out += data.dump();
  out += "\n\n";
  return out;
}

Gateway::Gateway(GatewayOptions options) : options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  hub_.config = options_.defaults;
  auto& svr = *server_;
  // No SO_REUSEPORT: a second gateway on the same port must fail to bind.
  svr.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });

  svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      send_reply(res, {status_for(e.code()), error_body(to_string(e.code()), e.detail())});
    } catch (const std::exception& e) {
      send_reply(res, {500, error_body("Internal", e.what())});
    }
  });

  svr.Get("/api/session", [this](const httplib::Request&, httplib::Response& res) { send_reply(res, {200, status()}); });
  svr.Post("/api/session/start", [this](const httplib::Request& req, httplib::Response& res) {
    if (auto body = parse_body(req, res)) send_reply(res, start(*body));
  });
  svr.Post("/api/session/stop", [this](const httplib::Request&, httplib::Response& res) { send_reply(res, stop()); });
  svr.Post("/api/session/config", [this](const httplib::Request& req, httplib::Response& res) {
    if (auto body = parse_body(req, res)) send_reply(res, configure(*body));
  });
  svr.Post("/api/control", [this](const httplib::Request& req, httplib::Response& res) {
    if (auto body = parse_body(req, res)) send_reply(res, control(*body));
  });

  svr.Get("/api/stream", [this](const httplib::Request&, httplib::Response& res) {
    struct Cursor {
      bool snapshot_sent = false;
      std::uint64_t session = 0;
      std::size_t next = 0;
    };
    auto cursor = std::make_shared<Cursor>();
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream", [this, cursor](std::size_t, httplib::DataSink& sink) {
      std::vector<std::string> out;
      bool finish = false;
      {
        std::unique_lock lock(hub_.mu);
        if (!cursor->snapshot_sent) {
          cursor->snapshot_sent = true;
          cursor->session = hub_.session_id;
          // Mid-session joiners start at the current tick.
          cursor->next = hub_.running && !hub_.events.empty() ? hub_.events.size() - 1 : hub_.events.size();
          lock.unlock();
          const std::string frame = sse_frame("snapshot", status());
          return sink.write(frame.data(), frame.size());
        }
        hub_.cv.wait_for(lock, 1s, [&] {
          return closing_.load() || hub_.session_id != cursor->session || hub_.events.size() > cursor->next;
        });
        if (closing_) {
          finish = true;
        } else {
          if (hub_.session_id != cursor->session) {
            cursor->session = hub_.session_id;
            cursor->next = 0;
          }
          while (cursor->next < hub_.events.size()) {
            out.push_back(hub_.events[cursor->next++]);
            if (out.back().rfind("event: end", 0) == 0) {
              finish = true;
              break;
            }
          }
        }
      }
      if (out.empty() && !finish) out.push_back(": keepalive\n\n");
      for (const auto& frame : out)
        if (!sink.write(frame.data(), frame.size())) return false;
      if (finish) sink.done();
      return true;
    });
  });

  if (!options_.ui_dir.empty()) {
    if (!svr.set_mount_point("/", options_.ui_dir))
      throw Error(Errc::ConfigInvalid, "UI directory not found: " + options_.ui_dir);
  } else {
    svr.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(Json{{"endpoints",
                            {"GET /api/session", "POST /api/session/start", "POST /api/session/stop",
                             "POST /api/session/config", "POST /api/control", "GET /api/stream"}}}
                          .dump(),
                      "application/json");
    });
  }

  if (options_.port == 0) {
    port_ = svr.bind_to_any_port(options_.host);
    if (port_ <= 0) throw Error(Errc::PortInUse, options_.host + ":0");
  } else {
    if (!svr.bind_to_port(options_.host, options_.port))
      throw Error(Errc::PortInUse, options_.host + ":" + std::to_string(options_.port));
    port_ = options_.port;
  }
  listener_ = std::thread([this] { server_->listen_after_bind(); });
  // stop() is a no-op until the listener is running.
  svr.wait_until_ready();
}

Gateway::~Gateway() { shutdown(); }

void Gateway::wait() {
  if (listener_.joinable()) listener_.join();
}

void Gateway::shutdown() {
  if (closing_.exchange(true)) {
    wait();
    return;
  }
  stop();
  hub_.cv.notify_all();
  server_->stop();
  wait();
}

Json Gateway::status() const {
  std::lock_guard lock(hub_.mu);
  return {{"state", hub_.running ? "running" : "idle"},
          {"session_id", hub_.session_id},
          {"tick", hub_.last_tick},
          {"config", config_to_json(hub_.running ? hub_.config : options_.defaults)}};
}

Gateway::Reply Gateway::configure(const Json& body) {
  std::lock_guard session_lock(session_mu_);
  try {
    SessionConfig c = config_from_json(body, options_.defaults);
    c.validate();
    std::lock_guard lock(hub_.mu);
    options_.defaults = c;
    return {200, config_to_json(c)};
  } catch (const Error& e) {
    return {status_for(e.code()), error_body(to_string(e.code()), e.detail())};
  }
}

Gateway::Reply Gateway::start(const Json& overrides) {
  std::lock_guard session_lock(session_mu_);
  if (closing_) return {503, error_body("ShuttingDown", "gateway is stopping")};
  {
    std::lock_guard lock(hub_.mu);
    if (hub_.running) return {409, error_body("SessionRunning", "stop the current session first")};
  }
  if (session_thread_.joinable()) session_thread_.join();

  SessionConfig config;
  std::shared_ptr<SessionRuntime> runtime;
  try {
    config = config_from_json(overrides, options_.defaults);
    runtime = std::make_shared<SessionRuntime>(make_runtime(config));
  } catch (const Error& e) {
    return {status_for(e.code()), error_body(to_string(e.code()), e.detail())};
  }

  std::uint64_t id = 0;
  {
    std::lock_guard lock(hub_.mu);
    id = ++hub_.session_id;
    hub_.running = true;
    hub_.events.clear();
    hub_.last_tick = 0;
    hub_.config = config;
  }
  {
    std::lock_guard lock(control_mu_);
    pending_control_.reset();
  }
  stop_requested_ = false;
  hub_.cv.notify_all();
  session_thread_ = std::thread([this, config, runtime, id] { session_loop(config, runtime, id); });
  return {200, {{"session_id", id}, {"config", config_to_json(config)}}};
}

Gateway::Reply Gateway::stop() {
  std::lock_guard session_lock(session_mu_);
  bool was_running = false;
  {
    std::lock_guard lock(hub_.mu);
    was_running = hub_.running;
  }
  stop_requested_ = true;
  hub_.cv.notify_all();
  if (session_thread_.joinable()) session_thread_.join();
  std::lock_guard lock(hub_.mu);
  if (!was_running) return {409, error_body("NoSession", "no session is running")};
  return {200, {{"session_id", hub_.session_id}, {"ticks", hub_.last_tick}}};
}

Gateway::Reply Gateway::control(const Json& body) {
  {
    std::lock_guard lock(hub_.mu);
    if (!hub_.running) return {409, error_body("NoSession", "no session is running")};
    if (!hub_.config.interactive) return {409, error_body("NotInteractive", "session is not interactive")};
  }
  ControlInput c;
  if (!body.is_object() || !number_in(body, "stick_x", -1.0, 1.0, c.stick_x) ||
      !number_in(body, "stick_y", -1.0, 1.0, c.stick_y) || !number_in(body, "throttle", 0.0, 1.0, c.throttle)) {
    return {400, error_body("BadControl", "need stick_x, stick_y in [-1, 1] and throttle in [0, 1]")};
  }
  const auto now = std::chrono::steady_clock::now();
  std::lock_guard lock(control_mu_);
  const auto min_gap = std::chrono::milliseconds(1000 / std::max(1, options_.max_control_hz));
  if (last_control_.time_since_epoch().count() != 0 && now - last_control_ < min_gap)
    return {429, error_body("RateLimited", "control input above the accepted rate")};
  last_control_ = now;
  pending_control_ = c;
  return {200, {{"accepted", true}}};
}

void Gateway::publish(std::uint64_t id, std::string frame, std::int64_t tick) {
  {
    std::lock_guard lock(hub_.mu);
    if (hub_.session_id != id) return;
    hub_.events.push_back(std::move(frame));
    if (tick > 0) hub_.last_tick = tick;
  }
  hub_.cv.notify_all();
}

void Gateway::session_loop(SessionConfig config, std::shared_ptr<SessionRuntime> runtime, std::uint64_t id) {
  std::string reason = "complete";
  Json extra = Json::object();
  std::int64_t ticks = 0;
  try {
    SessionEngine engine(config, *runtime);
    std::ofstream log;
    SessionHeader header;
    header.config = config;
    header.task_id = config.task_id;
    header.spec = runtime->spec;
    header.backend_id = runtime->backend->id();

    std::optional<SimulationSession> sim;
    std::vector<TelemetryRecord> telemetry;
    if (config.telemetry.empty()) {
      const std::string name = config.resolved_scenario();
      Scenario scenario = name.find('/') != std::string::npos || name.ends_with(".json") ? load_scenario_file(name)
                                                                                         : load_builtin_scenario(name);
      if (scenario.task_id != config.task_id)
        throw Error(Errc::ConfigInvalid, "scenario " + scenario.name + " is for task " + scenario.task_id);
      header.scenario = scenario.name;
      header.condition = scenario.condition;
      sim.emplace(std::move(scenario), runtime->spec, config.trainee, config.seed);
    } else {
      header.scenario = config.telemetry;
      std::ifstream in(config.telemetry);
      if (!in) throw Error(Errc::Io, "cannot read " + config.telemetry);
      TelemetryReader reader;
      std::string line;
      while (std::getline(in, line))
        if (!line.empty()) telemetry.push_back(reader.read(line));
    }
    if (!config.log.empty()) {
      log.open(config.log, std::ios::binary | std::ios::trunc);
      if (!log) throw Error(Errc::Io, "cannot write " + config.log);
      write_log_header(log, header);
    }

    const auto t0 = std::chrono::steady_clock::now();
    std::size_t next_telemetry = 0;
    while (sim ? !sim->finished() : next_telemetry < telemetry.size()) {
      if (stop_requested_) {
        reason = "stopped";
        break;
      }
      SessionRecord rec;
      if (sim) {
        if (config.interactive) {
          std::lock_guard lock(control_mu_);
          if (pending_control_) sim->set_external_control(*pending_control_);
        }
        const ScenarioTick tick = sim->advance();
        rec = engine.run_tick(tick.record, tick.control);
        sim->set_phase(engine.tracker().progress().phase);
        if (config.assist) sim->apply_commands(commands_of(rec));
      } else {
        rec = engine.run_tick(telemetry[next_telemetry++], ControlInput{});
      }
      if (log.is_open()) {
        write_log_record(log, rec);
        log.flush();
      }
      ++ticks;
      Json payload = record_to_json(rec);
      payload["session_id"] = id;
      publish(id, sse_frame("tick", payload), rec.tick);

      std::unique_lock lock(hub_.mu);
      hub_.cv.wait_until(lock, t0 + std::chrono::milliseconds(config.tick_ms) * ticks,
                         [&] { return stop_requested_.load(); });
    }
    if (log.is_open()) write_log_end(log, static_cast<std::size_t>(ticks), reason);
  } catch (const Error& e) {
    reason = "error";
    extra = error_body(to_string(e.code()), e.detail());
  }
  Json end = {{"session_id", id}, {"reason", reason}, {"ticks", ticks}};
  end.update(extra);
  publish(id, sse_frame("end", end), 0);
  {
    std::lock_guard lock(hub_.mu);
    if (hub_.session_id == id) hub_.running = false;
  }
  hub_.cv.notify_all();
}

}  // namespace aerocue
