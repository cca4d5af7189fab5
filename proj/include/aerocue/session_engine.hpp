#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aerocue/device.hpp"
#include "aerocue/ems_control.hpp"
#include "aerocue/flight_sim.hpp"
#include "aerocue/guidance_pipeline.hpp"
#include "aerocue/knowledge_base.hpp"
#include "aerocue/task_standards.hpp"

namespace aerocue {

inline constexpr std::string_view kLogSchema = "aerocue.session/1";

struct SessionConfig {
  std::string task_id = "steep_turn";
  // Built-in scenario name or a path to a scenario JSON file.
  std::string scenario;
  // JSON-lines telemetry file; when set it replaces the simulator.
  std::string telemetry;
  std::string backend = "oracle";  // oracle | remote
  RemoteChatBackend::Options remote;
  bool assist = true;
  std::uint64_t seed = 1;
  std::string profile;  // calibration profile file; empty: default profile
  int deadline_ms = 800;
  int ems_duration_ms = 800;
  EnvelopeShape envelope;
  TraineeSkill trainee;
  std::string device = "sim";  // sim | tcp://host:port
  std::string index;           // saved index file; empty: built-in corpus
  RemoteEmbedder::Options embed;
  std::string log;             // output JSON-lines path; empty: none
  int tick_ms = 1000;          // gateway pacing
  bool interactive = false;    // gateway only: controls come from the client

  // Throws ConfigInvalid.
  void validate() const;
  // First scenario for the task when `scenario` is empty.
  std::string resolved_scenario() const;
};

// API keys are never written out.
Json config_to_json(const SessionConfig& c);
// Missing keys keep their defaults. Throws ConfigInvalid.
SessionConfig config_from_json(const Json& j, SessionConfig base = {});

struct VoiceEvent {
  std::int64_t tick = 0;
  Instrument instrument = Instrument::altimeter;
  std::string template_id;

  bool operator==(const VoiceEvent&) const = default;
};

struct EmittedCommand {
  EmsCommand command;
  bool clamped = false;
  std::string frame;  // hex
  bool acked = false;
};

struct RejectedCommand {
  Channel channel = Channel::fwd;
  Trigger purpose = Trigger::correction;
  std::string reason;
};

struct SessionRecord {
  std::int64_t tick = 0;
  TelemetrySource source = TelemetrySource::sim;
  FlightState state;
  ControlInput control;
  DeviationReport report;
  std::vector<std::string> provenance;
  bool align_degraded = false;
  StageRecords stages = empty_stage_records();
  std::optional<GuidancePacket> packet;
  std::optional<std::string> chain_error;
  std::vector<EmittedCommand> commands;
  std::vector<RejectedCommand> rejected;
  std::vector<VoiceEvent> voice;
  ValidatorVerdict verdict;

  double pipeline_latency_ms() const noexcept;
};

Json record_to_json(const SessionRecord& r);
// Throws CorruptLog.
SessionRecord record_from_json(const Json& j);

struct SessionHeader {
  std::string schema = std::string(kLogSchema);
  SessionConfig config;
  std::string task_id;
  std::string scenario;
  ScenarioCondition condition = ScenarioCondition::normal;
  TaskSpec spec;
  std::string backend_id;
};
Json header_to_json(const SessionHeader& h);
SessionHeader header_from_json(const Json& j);

struct SessionLog {
  SessionHeader header;
  std::vector<SessionRecord> records;
  std::string end_reason;  // empty when the log has no end line
};

// JSON-lines: header, one line per tick, end line.
void write_log_header(std::ostream& out, const SessionHeader& h);
void write_log_record(std::ostream& out, const SessionRecord& r);
void write_log_end(std::ostream& out, std::size_t ticks, const std::string& reason);
std::string log_to_string(const SessionLog& log);
// Throws CorruptLog naming the 1-based line number, Io.
SessionLog parse_log(std::string_view text);
SessionLog load_log(const std::filesystem::path& path);

// Everything a session needs besides its config. Built by make_runtime.
struct SessionRuntime {
  TaskSpec spec;
  CalibrationProfile profile;
  std::unique_ptr<Backend> backend;
  std::unique_ptr<Backend> inner_backend;  // wrapped by `backend` when delayed
  std::unique_ptr<Embedder> embedder;
  std::unique_ptr<VectorIndex> index;
  std::unique_ptr<DeviceLink> device;
};

// The embedder an index was built with; a remote one takes endpoint and key
// from `remote`. Throws ConfigInvalid for an unknown embedder name.
std::unique_ptr<Embedder> embedder_for(const VectorIndex& index, const RemoteEmbedder::Options& remote);

// Loads the task, profile, index and backend and opens the device when
// assist is on. Throws ConfigInvalid, DeviceUnavailable, UnknownTask, Io.
SessionRuntime make_runtime(const SessionConfig& config);

// The per-tick loop body shared by batch and interactive sessions.
class SessionEngine {
 public:
  SessionEngine(SessionConfig config, SessionRuntime& runtime);

  // Standards, pipeline within the deadline, then gate, encode, send and voice.
  // Failures become record fields. Throws TickRegression when `record.tick`
  // does not advance.
  SessionRecord run_tick(const TelemetryRecord& record, const ControlInput& control);

  const StandardsTracker& tracker() const noexcept { return tracker_; }
  const SessionConfig& config() const noexcept { return config_; }
  const SafetyGate& gate() const noexcept { return gate_; }

 private:
  SessionConfig config_;
  SessionRuntime& runtime_;
  StandardsTracker tracker_;
  GuidancePipeline pipeline_;
  ChainRunner runner_;
  SafetyGate gate_;
  std::optional<std::int64_t> last_tick_;
};

// Commands from the record, ready for SimulationSession::apply_commands.
std::vector<EmsCommand> commands_of(const SessionRecord& r);

using RecordSink = std::function<void(const SessionRecord&)>;

// Batch session: synthetic trainee (or telemetry file) until the scenario
// ends. Writes config.log when set. Throws ConfigInvalid, DeviceUnavailable.
SessionLog run_session(const SessionConfig& config, const RecordSink& sink = {});
// Same loop with a caller-provided runtime (tests inject backends/devices).
SessionLog run_session(const SessionConfig& config, SessionRuntime& runtime, const RecordSink& sink = {});

struct ReplayMismatch {
  std::int64_t tick = 0;
  std::string field;  // report, verdict.c1, verdict.c2, verdict.c3, deadline, packet, tick
  std::string detail;
};

struct ReplayResult {
  std::size_t ticks = 0;
  std::vector<ReplayMismatch> mismatches;
  std::vector<ValidatorVerdict> verdicts;  // recomputed, one per tick
};

// Recomputes reports and verdicts from the stored states and stage payloads.
ReplayResult replay(const SessionLog& log);

}  // namespace aerocue
