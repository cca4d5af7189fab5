#include <filesystem>
#include <fstream>
#include <sstream>

#include "aerocue/session_engine.hpp"
#include "test_support.hpp"

using namespace aerocue;
using namespace std::chrono_literals;

namespace {

SessionConfig sloppy(std::string task = "steep_turn", std::uint64_t seed = 3) {
  SessionConfig c;
  c.task_id = std::move(task);
  c.seed = seed;
  c.trainee.gain_error = 1.3;
  c.trainee.reaction_delay_s = 1.0;
  c.trainee.noise_sigma = 0.5;
  return c;
}

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "aerocue_session_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::string join(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

bool nominal(const DeviationReport& r) {
  for (const auto& d : r.deviations)
    if (!d.in_band) return false;
  return true;
}

}  // namespace

TEST_CASE("ninety second steep turn yields one record per tick") {
  const SessionLog log = run_session(sloppy());
  REQUIRE(log.records.size() == 90);
  for (std::size_t i = 0; i < log.records.size(); ++i) CHECK(log.records[i].tick == static_cast<std::int64_t>(i + 1));
  CHECK(log.header.task_id == "steep_turn");
  CHECK(log.header.backend_id == "oracle");
  CHECK(log.end_reason == "complete");
}

TEST_CASE("oracle sessions are byte identical across runs and match the written file") {
  SessionConfig c = sloppy("straight_level", 7);
  c.log = temp_path("det.jsonl").string();
  const SessionLog a = run_session(c);
  const std::string file_a = slurp(c.log);
  const SessionLog b = run_session(c);
  CHECK(file_a == slurp(c.log));
  CHECK(log_to_string(a) == log_to_string(b));
  CHECK(log_to_string(a) == file_a);
  CHECK(log_to_string(parse_log(file_a)) == file_a);
}

TEST_CASE("assist off emits no commands and no voice") {
  SessionConfig c = sloppy();
  c.assist = false;
  const SessionLog log = run_session(c);
  std::size_t packets = 0;
  for (const auto& r : log.records) {
    CHECK(r.commands.empty());
    CHECK(r.rejected.empty());
    CHECK(r.voice.empty());
    packets += r.packet.has_value();
  }
  // Guidance is still produced and validated, just not delivered.
  CHECK(packets > 0);
}

TEST_CASE("per tick delivery follows the packet") {
  std::size_t nominal_ticks = 0, pre_starts = 0, corrections = 0;
  for (const std::string task : {"steep_turn", "straight_level", "takeoff_climb", "deadstick_landing"}) {
    for (std::uint64_t seed : {1u, 2u}) {
      const SessionLog log = run_session(sloppy(task, seed));
      for (const auto& r : log.records) {
        CAPTURE(task);
        CAPTURE(r.tick);
        CHECK(r.verdict.overall());
        for (std::size_t s = 0; s < 3; ++s) CHECK(r.stages[s].completed == !r.stages[s].payload.is_null());
        const std::size_t delivered = r.commands.size() + r.rejected.size();
        for (const auto& c : r.commands) CHECK(c.command.start_tick == r.tick);
        if (!r.packet) {
          CHECK(delivered == 0);
          CHECK(r.voice.empty());
          if (nominal(r.report) && !r.report.phase_event) ++nominal_ticks;
          continue;
        }
        const GuidancePacket& p = *r.packet;
        if (p.trigger == Trigger::pre_start) {
          ++pre_starts;
          REQUIRE(r.report.phase_event);
          CHECK(delivered == 1);
          CHECK(r.voice.empty());
          for (const auto& c : r.commands) {
            CHECK(c.command.envelope.mode == EmsMode::swell);
            CHECK(c.command.purpose == Trigger::pre_start);
          }
        } else {
          REQUIRE(r.report.worst);
          const ControlMapping m = control_mapping(*r.report.worst);
          REQUIRE(r.voice.size() == 1);
          CHECK(r.voice[0].instrument == m.instrument);
          CHECK(r.voice[0].tick == r.tick);
          if (p.stick_op) {
            ++corrections;
            CHECK(delivered == 1);
            for (const auto& c : r.commands) {
              CHECK(c.command.envelope.mode == EmsMode::rising);
              CHECK(c.command.channel == map_direction(*p.stick_op));
              CHECK(c.acked);
            }
          } else {
            CHECK(delivered == 0);
          }
        }
      }
    }
  }
  CHECK(nominal_ticks > 0);
  CHECK(pre_starts > 0);
  CHECK(corrections > 0);
}

TEST_CASE("direct ticks: nominal, voice-only and stick corrections") {
  SessionConfig c = sloppy("straight_level");
  SessionRuntime rt = make_runtime(c);
  SessionEngine engine(c, rt);
  auto tick = [&](std::int64_t n, double alt, double ias) {
    TelemetryRecord rec;
    rec.tick = n;
    rec.state.t = static_cast<double>(n);
    rec.state.altitude_ft = alt;
    rec.state.ias_kt = ias;
    rec.state.heading_deg = 90;
    rec.state.pitch_deg = 3.5;
    return engine.run_tick(rec, {});
  };
  const SessionRecord calm = tick(1, 4500, 110);
  CHECK_FALSE(calm.packet);
  CHECK(calm.commands.empty());
  CHECK(calm.voice.empty());

  const SessionRecord fast = tick(2, 4500, 140);
  REQUIRE(fast.packet);
  CHECK_FALSE(fast.packet->stick_op);
  CHECK(fast.commands.empty());
  REQUIRE(fast.voice.size() == 1);
  CHECK(fast.voice[0].instrument == Instrument::airspeed_indicator);

  const SessionRecord low = tick(3, 4300, 110);
  REQUIRE(low.packet);
  REQUIRE(low.commands.size() == 1);
  CHECK(low.commands[0].command.channel == Channel::back);
  CHECK(low.commands[0].command.envelope.mode == EmsMode::rising);
  REQUIRE(low.voice.size() == 1);
  CHECK(low.voice[0].instrument == Instrument::altimeter);
  CHECK(low.verdict.overall());
}

TEST_CASE("run_tick rejects ticks that do not advance") {
  SessionConfig c = sloppy();
  SessionRuntime rt = make_runtime(c);
  SessionEngine engine(c, rt);
  TelemetryRecord rec;
  rec.tick = 1;
  rec.state.t = 1;
  rec.state.altitude_ft = 4500;
  rec.state.ias_kt = 110;
  engine.run_tick(rec, {});
  CHECK_ERRC(engine.run_tick(rec, {}), Errc::TickRegression);
  rec.tick = 2;
  CHECK(engine.run_tick(rec, {}).tick == 2);
}

TEST_CASE("late chains deliver nothing") {
  SessionConfig c = sloppy();
  c.deadline_ms = 100;
  SessionRuntime rt = make_runtime(c);
  rt.inner_backend = std::move(rt.backend);
  rt.backend = std::make_unique<DelayedBackend>(*rt.inner_backend, 300ms, std::set<StageId>{StageId::guidance});

  const Scenario scenario = load_builtin_scenario("steep_turn_abnormal_1");
  SimulationSession sim(scenario, rt.spec, c.trainee, c.seed);
  SessionLog log;
  log.header.config = c;
  log.header.spec = rt.spec;
  {
    SessionEngine engine(c, rt);
    for (int i = 0; i < 6; ++i) {
      const ScenarioTick t = sim.advance();
      SessionRecord r = engine.run_tick(t.record, t.control);
      sim.set_phase(engine.tracker().progress().phase);
      CHECK(r.commands.empty());
      CHECK(r.voice.empty());
      CHECK(r.chain_error.has_value());
      log.records.push_back(std::move(r));
    }
  }
  const ReplayResult rep = replay(log);
  for (const auto& m : rep.mismatches) CHECK_MESSAGE(m.field != "deadline", m.detail);
}

TEST_CASE("replay of an untampered log finds nothing") {
  for (const std::string task : {"steep_turn", "takeoff_climb"}) {
    const SessionLog log = run_session(sloppy(task));
    const ReplayResult rep = replay(parse_log(log_to_string(log)));
    CHECK(rep.ticks == log.records.size());
    CHECK(rep.mismatches.empty());
    REQUIRE(rep.verdicts.size() == log.records.size());
    for (std::size_t i = 0; i < rep.verdicts.size(); ++i)
      CHECK(rep.verdicts[i].overall() == log.records[i].verdict.overall());
  }
}

TEST_CASE("replay flags a tampered stick direction at its tick") {
  const SessionLog log = run_session(sloppy());
  auto lines = lines_of(log_to_string(log));
  std::int64_t tampered = 0;
  for (std::size_t i = 1; i < lines.size() && tampered == 0; ++i) {
    Json j = Json::parse(lines[i]);
    if (j["type"] != "tick") continue;
    Json& packet = j["stages"][2]["payload"]["packet"];
    if (packet.is_null() || packet["stick_op"].is_null()) continue;
    Json& dir = packet["stick_op"]["direction"];
    dir = dir == "+" ? "-" : "+";
    tampered = j["tick"].get<std::int64_t>();
    lines[i] = j.dump();
  }
  REQUIRE(tampered > 0);
  const ReplayResult rep = replay(parse_log(join(lines)));
  bool c3 = false;
  for (const auto& m : rep.mismatches) {
    CHECK(m.tick == tampered);
    c3 = c3 || m.field == "verdict.c3";
  }
  CHECK(c3);
}

TEST_CASE("replay flags a tampered state and a missing tick") {
  const SessionLog log = run_session(sloppy());
  auto lines = lines_of(log_to_string(log));
  Json j = Json::parse(lines[20]);
  j["state"]["altitude_ft"] = j["state"]["altitude_ft"].get<double>() + 400.0;
  lines[20] = j.dump();
  ReplayResult rep = replay(parse_log(join(lines)));
  REQUIRE_FALSE(rep.mismatches.empty());
  CHECK(rep.mismatches.front().tick == j["tick"].get<std::int64_t>());
  CHECK(rep.mismatches.front().field == "report");

  lines = lines_of(log_to_string(log));
  lines.erase(lines.begin() + 30);
  rep = replay(parse_log(join(lines)));
  REQUIRE_FALSE(rep.mismatches.empty());
  CHECK(rep.mismatches.front().field == "tick");
}

TEST_CASE("corrupt logs name the offending line") {
  const SessionLog log = run_session(sloppy());
  const std::string text = log_to_string(log);
  auto lines = lines_of(text);
  REQUIRE(lines.size() == 92);

  SUBCASE("truncated final line") {
    lines.pop_back();  // end line
    const std::string last = lines.back();
    lines.pop_back();
    std::string cut = join(lines) + last.substr(0, last.size() / 2);
    try {
      parse_log(cut);
      FAIL("expected CorruptLog");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::CorruptLog);
      CHECK(e.detail().find("line 91") != std::string::npos);
    }
  }
  SUBCASE("duplicate tick") {
    lines.insert(lines.begin() + 5, lines[5]);
    try {
      parse_log(join(lines));
      FAIL("expected CorruptLog");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::CorruptLog);
      CHECK(e.detail().find("line 7") != std::string::npos);
    }
  }
  SUBCASE("bad header") {
    lines[0] = R"({"type":"header","schema":"aerocue.session/0"})";
    CHECK_ERRC(parse_log(join(lines)), Errc::CorruptLog);
  }
  SUBCASE("missing field") {
    Json j = Json::parse(lines[3]);
    j.erase("report");
    lines[3] = j.dump();
    CHECK_ERRC(parse_log(join(lines)), Errc::CorruptLog);
  }
  SUBCASE("empty") { CHECK_ERRC(parse_log(""), Errc::CorruptLog); }
  SUBCASE("missing file") { CHECK_ERRC(load_log(temp_path("nope.jsonl")), Errc::Io); }
}

TEST_CASE("config validation and serialization") {
  SessionConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.resolved_scenario() == "steep_turn_normal_1");

  SessionConfig bad = c;
  bad.deadline_ms = 1000;
  CHECK_ERRC(bad.validate(), Errc::ConfigInvalid);
  bad = c;
  bad.task_id = "loop";
  CHECK_ERRC(bad.validate(), Errc::ConfigInvalid);
  bad = c;
  bad.backend = "magic";
  CHECK_ERRC(bad.validate(), Errc::ConfigInvalid);
  bad = c;
  bad.ems_duration_ms = 100;
  CHECK_ERRC(bad.validate(), Errc::ConfigInvalid);
  bad = c;
  bad.device = "usb0";
  CHECK_ERRC(bad.validate(), Errc::ConfigInvalid);
  bad = c;
  bad.trainee.compliance = 2.0;
  CHECK_ERRC(bad.validate(), Errc::ConfigInvalid);
  CHECK_ERRC(run_session(bad), Errc::ConfigInvalid);

  c.remote.api_key = "secret";
  c.embed.api_key = "secret2";
  c.seed = 99;
  c.trainee.noise_sigma = 0.25;
  const Json j = config_to_json(c);
  CHECK(j.dump().find("secret") == std::string::npos);
  const SessionConfig back = config_from_json(j);
  CHECK(config_to_json(back) == j);
  CHECK(back.seed == 99);

  CHECK(config_from_json(Json{{"deadline_ms", 300}}, c).deadline_ms == 300);
  CHECK_ERRC(config_from_json(Json{{"seed", "x"}}), Errc::ConfigInvalid);
  CHECK_ERRC(config_from_json(Json::array()), Errc::ConfigInvalid);

  SessionConfig wrong = c;
  wrong.scenario = "straight_level_normal_1";
  CHECK_ERRC(run_session(wrong), Errc::ConfigInvalid);
}

TEST_CASE("frames reach a TCP stimulator and are acknowledged") {
  DeviceServer server;
  SessionConfig c = sloppy();
  c.device = "tcp://127.0.0.1:" + std::to_string(server.port());
  const SessionLog log = run_session(c);
  std::size_t sent = 0;
  for (const auto& r : log.records)
    for (const auto& cmd : r.commands) {
      ++sent;
      CHECK(cmd.acked);
      CHECK(cmd.frame.size() == 2 * kFrameSize);
    }
  CHECK(sent > 0);
  CHECK(server.frames_acked() == sent);
  CHECK(server.frames_dropped() == 0);

  // Same commands as the in-process device.
  SessionConfig sim = sloppy();
  const SessionLog sim_log = run_session(sim);
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    REQUIRE(sim_log.records[i].commands.size() == log.records[i].commands.size());
    for (std::size_t k = 0; k < log.records[i].commands.size(); ++k)
      CHECK(sim_log.records[i].commands[k].frame == log.records[i].commands[k].frame);
  }
}

TEST_CASE("stimulator drops invalid frames without acking") {
  DeviceServer server;
  TcpDeviceLink link("tcp://127.0.0.1:" + std::to_string(server.port()), 100ms);
  EmsCommand cmd;
  cmd.channel = Channel::right;
  cmd.envelope = synthesize(EmsMode::rising, MagnitudeClass::firm, 800, CalibrationProfile::default_profile(),
                            Channel::right);
  DeviceFrame frame = encode_frame(cmd, CalibrationProfile::default_profile());
  auto ack = link.send(frame);
  REQUIRE(ack);
  CHECK((*ack)[0] == kAckByte);
  CHECK((*ack)[1] == crc8(frame));
  frame[7] ^= 0xFF;
  CHECK_FALSE(link.send(frame));
  frame[7] ^= 0xFF;
  CHECK(link.send(frame));
  CHECK(server.frames_acked() == 2);
  CHECK(server.frames_dropped() == 1);
}

TEST_CASE("assist needs a reachable device") {
  int port = 0;
  {
    DeviceServer server;
    port = server.port();
  }
  SessionConfig c = sloppy();
  c.device = "tcp://127.0.0.1:" + std::to_string(port);
  CHECK_ERRC(make_runtime(c), Errc::DeviceUnavailable);
  CHECK_ERRC(run_session(c), Errc::DeviceUnavailable);
  c.assist = false;
  CHECK(run_session(c).records.size() == 90);

  DeviceServer first;
  CHECK_ERRC(DeviceServer("127.0.0.1", first.port()), Errc::PortInUse);
}

TEST_CASE("telemetry files replace the simulator") {
  const SessionLog sim_log = run_session(sloppy("takeoff_climb"));
  const auto path = temp_path("telemetry.jsonl");
  {
    std::ofstream out(path);
    for (const auto& r : sim_log.records) out << serialize_telemetry_line({r.tick, r.state, TelemetrySource::sim}) << "\n";
  }
  SessionConfig c = sloppy("takeoff_climb");
  c.telemetry = path.string();
  const SessionLog ext = run_session(c);
  REQUIRE(ext.records.size() == sim_log.records.size());
  for (std::size_t i = 0; i < ext.records.size(); ++i) {
    CHECK(ext.records[i].source == TelemetrySource::external);
    CHECK(report_to_json(ext.records[i].report) == report_to_json(sim_log.records[i].report));
  }
  CHECK(replay(parse_log(log_to_string(ext))).mismatches.empty());

  c.telemetry = temp_path("missing.jsonl").string();
  CHECK_ERRC(run_session(c), Errc::Io);
}
