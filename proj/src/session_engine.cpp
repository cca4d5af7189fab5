#include "aerocue/session_engine.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "aerocue/error.hpp"

namespace aerocue {

namespace {

Json skill_to_json(const TraineeSkill& s) {
  return {{"gain_error", s.gain_error},
          {"reaction_delay_s", s.reaction_delay_s},
          {"noise_sigma", s.noise_sigma},
          {"compliance", s.compliance}};
}

TraineeSkill skill_from_json(const Json& j, TraineeSkill s) {
  s.gain_error = j.value("gain_error", s.gain_error);
  s.reaction_delay_s = j.value("reaction_delay_s", s.reaction_delay_s);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.compliance = j.value("compliance", s.compliance);
  return s;
}

std::string_view to_string(TelemetrySource s) noexcept { return s == TelemetrySource::sim ? "sim" : "external"; }

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool looks_like_path(const std::string& s) {
  return s.find('/') != std::string::npos || (s.size() > 5 && s.ends_with(".json"));
}

}  // namespace

void SessionConfig::validate() const {
  if (std::find(kTaskIds.begin(), kTaskIds.end(), task_id) == kTaskIds.end())
    throw Error(Errc::ConfigInvalid, "unknown task " + task_id);
  if (backend != "oracle" && backend != "remote") throw Error(Errc::ConfigInvalid, "backend must be oracle or remote");
  if (deadline_ms <= 0 || deadline_ms >= 1000) throw Error(Errc::ConfigInvalid, "deadline_ms must be in (0, 1000)");
  if (ems_duration_ms < 200 || ems_duration_ms > 3000)
    throw Error(Errc::ConfigInvalid, "ems_duration_ms must be in [200, 3000]");
  if (tick_ms <= 0) throw Error(Errc::ConfigInvalid, "tick_ms must be positive");
  const EnvelopeShape& e = envelope;
  for (double v : {e.constant_level, e.floor, e.span, e.light_scale, e.firm_scale})
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw Error(Errc::ConfigInvalid, "envelope constants must lie in [0, 1]");
  if (e.span <= 0.0) throw Error(Errc::ConfigInvalid, "envelope span must be positive");
  if (e.floor + e.span > 1.0 + 1e-12) throw Error(Errc::ConfigInvalid, "envelope floor + span exceeds 1");
  if (!(e.sample_rate_hz >= 10.0 && e.sample_rate_hz <= 10000.0))
    throw Error(Errc::ConfigInvalid, "envelope sample_rate_hz must be in [10, 10000]");
  if (device != "sim" && device.rfind("tcp://", 0) != 0)
    throw Error(Errc::ConfigInvalid, "device must be sim or tcp://host:port");
  trainee.validate();
}

std::string SessionConfig::resolved_scenario() const {
  return scenario.empty() ? task_id + "_normal_1" : scenario;
}

Json config_to_json(const SessionConfig& c) {
  return {{"task", c.task_id},
          {"scenario", c.scenario},
          {"telemetry", c.telemetry},
          {"backend", c.backend},
          {"remote",
           {{"base_url", c.remote.base_url},
            {"model", c.remote.model},
            {"timeout_ms", c.remote.timeout.count()},
            {"max_retries", c.remote.max_retries}}},
          {"assist", c.assist},
          {"seed", c.seed},
          {"profile", c.profile},
          {"deadline_ms", c.deadline_ms},
          {"ems_duration_ms", c.ems_duration_ms},
          {"envelope",
           {{"constant_level", c.envelope.constant_level},
            {"floor", c.envelope.floor},
            {"span", c.envelope.span},
            {"light_scale", c.envelope.light_scale},
            {"firm_scale", c.envelope.firm_scale},
            {"sample_rate_hz", c.envelope.sample_rate_hz}}},
          {"trainee", skill_to_json(c.trainee)},
          {"device", c.device},
          {"index", c.index},
          {"embed", {{"base_url", c.embed.base_url}, {"model", c.embed.model}}},
          {"log", c.log},
          {"tick_ms", c.tick_ms},
          {"interactive", c.interactive}};
}

SessionConfig config_from_json(const Json& j, SessionConfig c) {
  try {
    if (!j.is_object()) throw Error(Errc::ConfigInvalid, "config must be an object");
    c.task_id = j.value("task", c.task_id);
    c.scenario = j.value("scenario", c.scenario);
    c.telemetry = j.value("telemetry", c.telemetry);
    c.backend = j.value("backend", c.backend);
    if (auto it = j.find("remote"); it != j.end()) {
      c.remote.base_url = it->value("base_url", c.remote.base_url);
      c.remote.model = it->value("model", c.remote.model);
      c.remote.api_key = it->value("api_key", c.remote.api_key);
      c.remote.timeout = std::chrono::milliseconds(it->value("timeout_ms", c.remote.timeout.count()));
      c.remote.max_retries = it->value("max_retries", c.remote.max_retries);
    }
    c.assist = j.value("assist", c.assist);
    c.seed = j.value("seed", c.seed);
    c.profile = j.value("profile", c.profile);
    c.deadline_ms = j.value("deadline_ms", c.deadline_ms);
    c.ems_duration_ms = j.value("ems_duration_ms", c.ems_duration_ms);
    if (auto it = j.find("trainee"); it != j.end()) c.trainee = skill_from_json(*it, c.trainee);
    if (auto it = j.find("envelope"); it != j.end()) {
      EnvelopeShape& e = c.envelope;
      e.constant_level = it->value("constant_level", e.constant_level);
      e.floor = it->value("floor", e.floor);
      e.span = it->value("span", e.span);
      e.light_scale = it->value("light_scale", e.light_scale);
      e.firm_scale = it->value("firm_scale", e.firm_scale);
      e.sample_rate_hz = it->value("sample_rate_hz", e.sample_rate_hz);
    }
    c.device = j.value("device", c.device);
    c.index = j.value("index", c.index);
    if (auto it = j.find("embed"); it != j.end()) {
      c.embed.base_url = it->value("base_url", c.embed.base_url);
      c.embed.model = it->value("model", c.embed.model);
      c.embed.api_key = it->value("api_key", c.embed.api_key);
    }
    c.log = j.value("log", c.log);
    c.tick_ms = j.value("tick_ms", c.tick_ms);
    c.interactive = j.value("interactive", c.interactive);
  } catch (const Json::exception& e) {
    throw Error(Errc::ConfigInvalid, e.what());
  }
  return c;
}

double SessionRecord::pipeline_latency_ms() const noexcept {
  double total = 0.0;
  for (const auto& s : stages) total += s.latency_ms;
  return total;
}

Json record_to_json(const SessionRecord& r) {
  Json stages = Json::array();
  for (const auto& s : r.stages) stages.push_back(stage_record_to_json(s));
  Json commands = Json::array();
  for (const auto& c : r.commands)
    commands.push_back({{"command", command_to_json(c.command)},
                        {"clamped", c.clamped},
                        {"frame", c.frame},
                        {"acked", c.acked}});
  Json rejected = Json::array();
  for (const auto& c : r.rejected)
    rejected.push_back({{"channel", to_string(c.channel)}, {"purpose", to_string(c.purpose)}, {"reason", c.reason}});
  Json voice = Json::array();
  for (const auto& v : r.voice)
    voice.push_back({{"tick", v.tick}, {"instrument", to_string(v.instrument)}, {"template", v.template_id}});
  return {{"type", "tick"},
          {"tick", r.tick},
          {"source", to_string(r.source)},
          {"state", state_to_json(r.state)},
          {"control", control_to_json(r.control)},
          {"report", report_to_json(r.report)},
          {"align", {{"provenance", r.provenance}, {"degraded", r.align_degraded}}},
          {"stages", stages},
          {"packet", r.packet ? packet_to_json(*r.packet) : Json()},
          {"chain_error", r.chain_error ? Json(*r.chain_error) : Json()},
          {"commands", commands},
          {"rejected", rejected},
          {"voice", voice},
          {"verdict", verdict_to_json(r.verdict)}};
}

SessionRecord record_from_json(const Json& j) {
  try {
    SessionRecord r;
    r.tick = j.at("tick").get<std::int64_t>();
    r.source = j.at("source").get<std::string>() == "sim" ? TelemetrySource::sim : TelemetrySource::external;
    r.state = state_from_json(j.at("state"));
    r.control = control_from_json(j.at("control"));
    r.report = report_from_json(j.at("report"));
    r.provenance = j.at("align").at("provenance").get<std::vector<std::string>>();
    r.align_degraded = j.at("align").at("degraded").get<bool>();
    const auto& stages = j.at("stages");
    if (!stages.is_array() || stages.size() != 3) throw Error(Errc::CorruptLog, "expected three stage records");
    for (std::size_t i = 0; i < 3; ++i) r.stages[i] = stage_record_from_json(stages[i]);
    if (const auto& p = j.at("packet"); !p.is_null()) {
      GuidancePacket pk;
      pk.tick = p.at("tick").get<std::int64_t>();
      auto parsed = packet_from_payload(Json{{"packet",
                                              {{"trigger", p.at("trigger")},
                                               {"ems_mode", p.at("ems_mode")},
                                               {"stick_op", p.at("stick_op")},
                                               {"instruments", p.at("instruments")},
                                               {"rationale", p.at("rationale")}}}},
                                        pk.tick);
      if (parsed) {
        pk = *parsed;
        pk.provenance = p.at("provenance").get<std::vector<std::string>>();
        r.packet = pk;
      }
    }
    if (const auto& e = j.at("chain_error"); !e.is_null()) r.chain_error = e.get<std::string>();
    for (const auto& c : j.at("commands")) {
      EmittedCommand ec;
      ec.command = command_from_json(c.at("command"));
      ec.clamped = c.at("clamped").get<bool>();
      ec.frame = c.at("frame").get<std::string>();
      ec.acked = c.at("acked").get<bool>();
      r.commands.push_back(std::move(ec));
    }
    for (const auto& c : j.at("rejected")) {
      RejectedCommand rc;
      auto ch = channel_from(c.at("channel").get<std::string>());
      auto pu = trigger_from(c.at("purpose").get<std::string>());
      if (!ch || !pu) throw Error(Errc::CorruptLog, "bad rejected command");
      rc.channel = *ch;
      rc.purpose = *pu;
      rc.reason = c.at("reason").get<std::string>();
      r.rejected.push_back(rc);
    }
    for (const auto& v : j.at("voice")) {
      auto inst = instrument_from(v.at("instrument").get<std::string>());
      if (!inst) throw Error(Errc::CorruptLog, "voice instrument outside vocabulary");
      r.voice.push_back({v.at("tick").get<std::int64_t>(), *inst, v.at("template").get<std::string>()});
    }
    r.verdict = verdict_from_json(j.at("verdict"));
    return r;
  } catch (const Json::exception& e) {
    throw Error(Errc::CorruptLog, e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::CorruptLog) throw;
    throw Error(Errc::CorruptLog, std::string(to_string(e.code())) + ": " + e.detail());
  }
}

Json header_to_json(const SessionHeader& h) {
  // The output path is not part of the session; leaving it out keeps logs of
  // the same run byte-identical wherever they are written.
  Json config = config_to_json(h.config);
  config.erase("log");
  return {{"type", "header"},
          {"schema", h.schema},
          {"task", h.task_id},
          {"scenario", h.scenario},
          {"condition", to_string(h.condition)},
          {"backend", h.backend_id},
          {"config", config},
          {"spec", task_spec_to_json(h.spec)}};
}

SessionHeader header_from_json(const Json& j) {
  try {
    SessionHeader h;
    if (j.at("type") != "header") throw Error(Errc::CorruptLog, "first line is not a header");
    h.schema = j.at("schema").get<std::string>();
    if (h.schema != kLogSchema) throw Error(Errc::CorruptLog, "unsupported log schema " + h.schema);
    h.task_id = j.at("task").get<std::string>();
    h.scenario = j.at("scenario").get<std::string>();
    h.condition = j.at("condition") == "abnormal" ? ScenarioCondition::abnormal : ScenarioCondition::normal;
    h.backend_id = j.at("backend").get<std::string>();
    h.config = config_from_json(j.at("config"));
    h.spec = task_spec_from_json(j.at("spec"));
    return h;
  } catch (const Json::exception& e) {
    throw Error(Errc::CorruptLog, e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::CorruptLog) throw;
    throw Error(Errc::CorruptLog, std::string(to_string(e.code())) + ": " + e.detail());
  }
}

void write_log_header(std::ostream& out, const SessionHeader& h) { out << header_to_json(h).dump() << '\n'; }
void write_log_record(std::ostream& out, const SessionRecord& r) { out << record_to_json(r).dump() << '\n'; }
void write_log_end(std::ostream& out, std::size_t ticks, const std::string& reason) {
  out << Json{{"type", "end"}, {"ticks", ticks}, {"reason", reason}}.dump() << '\n';
}

std::string log_to_string(const SessionLog& log) {
  std::ostringstream out;
  write_log_header(out, log.header);
  for (const auto& r : log.records) write_log_record(out, r);
  if (!log.end_reason.empty()) write_log_end(out, log.records.size(), log.end_reason);
  return out.str();
}

SessionLog parse_log(std::string_view text) {
  SessionLog log;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool have_header = false;
  bool ended = false;
  auto corrupt = [&](const std::string& why) {
    return Error(Errc::CorruptLog, "line " + std::to_string(line_no) + ": " + why);
  };
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    const bool terminated = nl != std::string_view::npos;
    if (!terminated) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.empty()) throw corrupt("empty line");
    if (ended) throw corrupt("content after end line");
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception&) {
      throw corrupt(terminated ? "not valid JSON" : "truncated line");
    }
    try {
      if (!have_header) {
        log.header = header_from_json(j);
        have_header = true;
        continue;
      }
      const std::string type = j.value("type", "");
      if (type == "end") {
        log.end_reason = j.value("reason", "");
        ended = true;
        continue;
      }
      if (type != "tick") throw Error(Errc::CorruptLog, "unknown line type");
      SessionRecord r = record_from_json(j);
      if (!log.records.empty() && r.tick <= log.records.back().tick) throw Error(Errc::CorruptLog, "tick does not advance");
      log.records.push_back(std::move(r));
    } catch (const Error& e) {
      throw corrupt(e.detail());
    }
  }
  if (!have_header) throw Error(Errc::CorruptLog, "line 1: missing header");
  return log;
}

SessionLog load_log(const std::filesystem::path& path) {
  try {
    return parse_log(read_file(path));
  } catch (const Error& e) {
    if (e.code() == Errc::CorruptLog) throw Error(Errc::CorruptLog, path.string() + ": " + e.detail());
    throw;
  }
}

std::unique_ptr<Embedder> embedder_for(const VectorIndex& index, const RemoteEmbedder::Options& remote) {
  const std::string& name = index.embedder_name();
  if (name.rfind("hash-fnv1a-", 0) == 0) return std::make_unique<HashEmbedder>(index.dimension());
  if (name.rfind("remote:", 0) == 0) {
    RemoteEmbedder::Options o = remote;
    o.model = name.substr(7);
    o.expected_dimension = index.dimension();
    return std::make_unique<RemoteEmbedder>(o);
  }
  throw Error(Errc::ConfigInvalid, "index built with unknown embedder " + name);
}

SessionRuntime make_runtime(const SessionConfig& config) {
  config.validate();
  SessionRuntime rt;
  rt.spec = load_task_spec(config.task_id);
  if (config.profile.empty()) {
    rt.profile = CalibrationProfile::default_profile();
  } else {
    try {
      rt.profile = profile_from_json(Json::parse(read_file(config.profile)));
    } catch (const Json::exception& e) {
      throw Error(Errc::ConfigInvalid, config.profile + ": " + e.what());
    }
    rt.profile.validate();
  }
  if (config.index.empty()) {
    rt.embedder = std::make_unique<HashEmbedder>();
    rt.index = std::make_unique<VectorIndex>(build_index(load_builtin_corpus(), *rt.embedder));
  } else {
    rt.index = std::make_unique<VectorIndex>(VectorIndex::load(config.index));
    rt.embedder = embedder_for(*rt.index, config.embed);
  }
  if (config.backend == "remote") {
    rt.backend = std::make_unique<RemoteChatBackend>(config.remote);
  } else {
    rt.backend = std::make_unique<OracleBackend>();
  }
  if (config.assist) rt.device = open_device(config.device);
  return rt;
}

SessionEngine::SessionEngine(SessionConfig config, SessionRuntime& runtime)
    : config_(std::move(config)),
      runtime_(runtime),
      tracker_(runtime.spec),
      pipeline_(runtime.spec, *runtime.backend, runtime.index.get(), runtime.embedder.get(),
                PipelineOptions{3, 1200, std::chrono::milliseconds(config_.deadline_ms)}),
      runner_(pipeline_) {}

SessionRecord SessionEngine::run_tick(const TelemetryRecord& record, const ControlInput& control) {
  if (last_tick_ && record.tick <= *last_tick_)
    throw Error(Errc::TickRegression, "tick " + std::to_string(record.tick) + " after " + std::to_string(*last_tick_));
  last_tick_ = record.tick;

  SessionRecord out;
  out.tick = record.tick;
  out.source = record.source;
  out.state = record.state;
  out.control = control;
  out.report = tracker_.step(record.tick, record.state);

  ChainResult chain = runner_.run(record.state, out.report);
  out.provenance = chain.context.provenance;
  out.align_degraded = chain.context.degraded;
  out.stages = chain.stages;
  out.packet = chain.packet;
  if (chain.error) out.chain_error = std::string(to_string(*chain.error));
  out.verdict = validate_record(out.report, out.stages);

  // Fail-silent: nothing leaves the engine for an incomplete or late chain.
  const bool in_time = chain.complete() && chain.latency_ms() <= config_.deadline_ms;
  if (!config_.assist || !in_time || !out.packet) return out;

  const GuidancePacket& p = *out.packet;
  if (p.stick_op) {
    EmsCommand cmd;
    cmd.channel = map_direction(*p.stick_op);
    cmd.start_tick = record.tick;
    cmd.purpose = p.trigger;
    try {
      cmd.envelope = synthesize(p.ems_mode, p.stick_op->magnitude, config_.ems_duration_ms, runtime_.profile,
                                cmd.channel, config_.envelope);
      const GateOutcome g = gate_.check(cmd, runtime_.profile);
      if (g.kind == GateOutcome::Kind::rejected) {
        out.rejected.push_back({cmd.channel, cmd.purpose, g.reason});
      } else {
        EmittedCommand ec;
        ec.command = g.command;
        ec.clamped = g.kind == GateOutcome::Kind::clamped;
        const DeviceFrame frame = encode_frame(g.command, runtime_.profile);
        ec.frame = frame_hex(frame);
        if (runtime_.device) {
          try {
            ec.acked = runtime_.device->send(frame).has_value();
          } catch (const Error&) {
            ec.acked = false;
          }
        }
        out.commands.push_back(std::move(ec));
      }
    } catch (const Error& e) {
      out.rejected.push_back({cmd.channel, cmd.purpose, std::string(to_string(e.code()))});
    }
  }
  if (p.trigger == Trigger::correction) {
    for (Instrument i : p.instruments) out.voice.push_back({record.tick, i, "correction.check_instrument.v1"});
  }
  return out;
}

std::vector<EmsCommand> commands_of(const SessionRecord& r) {
  std::vector<EmsCommand> out;
  for (const auto& c : r.commands) out.push_back(c.command);
  return out;
}

SessionLog run_session(const SessionConfig& config, const RecordSink& sink) {
  SessionRuntime rt = make_runtime(config);
  return run_session(config, rt, sink);
}

SessionLog run_session(const SessionConfig& config, SessionRuntime& runtime, const RecordSink& sink) {
  config.validate();
  SessionLog log;
  log.header.config = config;
  log.header.task_id = config.task_id;
  log.header.spec = runtime.spec;
  log.header.backend_id = runtime.backend->id();

  std::ofstream file;
  auto emit = [&](const SessionRecord& r) {
    if (file.is_open()) {
      write_log_record(file, r);
      file.flush();
    }
    if (sink) sink(r);
    log.records.push_back(r);
  };

  SessionEngine engine(config, runtime);
  if (!config.telemetry.empty()) {
    log.header.scenario = config.telemetry;
    const std::string text = read_file(config.telemetry);
    if (!config.log.empty()) {
      file.open(config.log, std::ios::binary | std::ios::trunc);
      if (!file) throw Error(Errc::Io, "cannot write " + config.log);
      write_log_header(file, log.header);
    }
    TelemetryReader reader;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      if (line.empty()) continue;
      const TelemetryRecord rec = reader.read(line);
      emit(engine.run_tick(rec, ControlInput{}));
    }
  } else {
    const std::string name = config.resolved_scenario();
    const Scenario scenario = looks_like_path(name) ? load_scenario_file(name) : load_builtin_scenario(name);
    if (scenario.task_id != config.task_id)
      throw Error(Errc::ConfigInvalid, "scenario " + scenario.name + " is for task " + scenario.task_id);
    log.header.scenario = scenario.name;
    log.header.condition = scenario.condition;
    if (!config.log.empty()) {
      file.open(config.log, std::ios::binary | std::ios::trunc);
      if (!file) throw Error(Errc::Io, "cannot write " + config.log);
      write_log_header(file, log.header);
    }
    SimulationSession sim(scenario, runtime.spec, config.trainee, config.seed);
    while (!sim.finished()) {
      const ScenarioTick tick = sim.advance();
      SessionRecord r = engine.run_tick(tick.record, tick.control);
      sim.set_phase(engine.tracker().progress().phase);
      if (config.assist) sim.apply_commands(commands_of(r));
      emit(r);
    }
  }
  log.end_reason = "complete";
  if (file.is_open()) write_log_end(file, log.records.size(), log.end_reason);
  return log;
}

ReplayResult replay(const SessionLog& log) {
  ReplayResult out;
  StandardsTracker tracker(log.header.spec);
  const double deadline = log.header.config.deadline_ms;
  std::optional<std::int64_t> prev;
  for (const SessionRecord& r : log.records) {
    ++out.ticks;
    auto flag = [&](std::string field, std::string detail) {
      out.mismatches.push_back({r.tick, std::move(field), std::move(detail)});
    };
    if (r.tick != (prev ? *prev + 1 : 1)) flag("tick", "expected " + std::to_string(prev ? *prev + 1 : 1));
    prev = r.tick;

    const DeviationReport report = tracker.step(r.tick, r.state);
    if (report_to_json(report) != report_to_json(r.report)) flag("report", "recomputed report differs");

    const ValidatorVerdict v = validate_record(report, r.stages);
    if (v.c1 != r.verdict.c1) flag("verdict.c1", "stored " + std::to_string(r.verdict.c1));
    if (v.c2 != r.verdict.c2) flag("verdict.c2", "stored " + std::to_string(r.verdict.c2));
    if (v.c3 != r.verdict.c3) flag("verdict.c3", "stored " + std::to_string(r.verdict.c3));
    out.verdicts.push_back(v);

    if (!r.commands.empty() && (r.chain_error || r.pipeline_latency_ms() > deadline))
      flag("deadline", "commands emitted for a late or failed chain");

    std::optional<GuidancePacket> expected;
    bool packet_ok = true;
    if (!r.chain_error) {
      try {
        expected = packet_from_payload(r.stages[2].payload, r.tick);
      } catch (const Error&) {
        packet_ok = false;
      }
    }
    const auto same = [](const std::optional<GuidancePacket>& a, const std::optional<GuidancePacket>& b) {
      if (a.has_value() != b.has_value()) return false;
      if (!a) return true;
      return a->trigger == b->trigger && a->ems_mode == b->ems_mode && a->stick_op == b->stick_op &&
             a->instruments == b->instruments;
    };
    if (packet_ok && !same(expected, r.packet)) flag("packet", "stored packet differs from stage 3 payload");

    for (const auto& c : r.commands) {
      if (!r.packet || !r.packet->stick_op || c.command.channel != map_direction(*r.packet->stick_op) ||
          c.command.envelope.mode != r.packet->ems_mode || c.command.start_tick != r.tick) {
        flag("commands", "command does not follow the packet");
      }
    }
  }
  return out;
}

}  // namespace aerocue
