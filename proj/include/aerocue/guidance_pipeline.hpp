#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "aerocue/ems_control.hpp"
#include "aerocue/error.hpp"
#include "aerocue/flight_state.hpp"
#include "aerocue/knowledge_base.hpp"
#include "aerocue/stick.hpp"
#include "aerocue/task_standards.hpp"

namespace aerocue {

using Clock = std::chrono::steady_clock;

enum class StageId : std::uint8_t { status_check = 1, guidance = 2, format = 3 };
inline constexpr std::array<StageId, 3> kStages = {StageId::status_check, StageId::guidance, StageId::format};
std::string_view to_string(StageId s) noexcept;
std::optional<StageId> stage_from(std::string_view s) noexcept;
inline std::size_t stage_index(StageId s) noexcept { return static_cast<std::size_t>(s) - 1; }

// "<stage>.v1". Prompt and schema files live under resources/prompts and
// resources/schemas.
std::string stage_schema_id(StageId s);
std::string stage_prompt_id(StageId s);
const Json& stage_schema(StageId s);
const std::string& stage_system_prompt(StageId s);
const std::string& stage_user_template(StageId s);
// Replaces each {{key}} with vars[key] (strings verbatim, other JSON dumped
// with 2-space indent). Unknown keys render empty.
std::string render_template(std::string_view tmpl, const Json& vars);

enum class FlightStatus { nominal, deviation, critical };
std::string_view to_string(FlightStatus s) noexcept;
std::optional<FlightStatus> status_from(std::string_view s) noexcept;

// Fixed voice-prompt vocabulary.
enum class Instrument {
  altimeter,
  attitude_indicator,
  airspeed_indicator,
  heading_indicator,
  vertical_speed_indicator,
};
std::string_view to_string(Instrument i) noexcept;  // "attitude indicator"
std::optional<Instrument> instrument_from(std::string_view s) noexcept;

// Control-axis table. Metrics with no axis get voice-only guidance.
struct ControlMapping {
  std::optional<StickAxis> axis;
  Instrument instrument = Instrument::attitude_indicator;
};
ControlMapping control_mapping(Metric m) noexcept;

inline constexpr double kFirmRatio = 1.25;
inline constexpr double kCriticalSeverity = 3.0;

// firm when |deviation| >= kFirmRatio * tolerance or the deviation is growing.
MagnitudeClass magnitude_for(const MetricDeviation& d) noexcept;
// Stick cue opposing the deviation on the metric's axis; nullopt for voice-only
// metrics or a zero deviation.
std::optional<StickOp> corrective_stick(const MetricDeviation& d) noexcept;
// nominal iff every metric is in band; critical when the worst severity
// reaches kCriticalSeverity.
FlightStatus expected_status(const DeviationReport& r) noexcept;

struct MetricAssessment {
  Metric metric = Metric::altitude_ft;
  bool in_band = true;
  std::string text;
};

struct StatusCheck {
  std::int64_t tick = 0;
  std::vector<MetricAssessment> assessments;
  FlightStatus status = FlightStatus::nominal;
  std::optional<Metric> worst;
};
Json status_check_payload(const StatusCheck& s);
// Throws MalformedResponse.
StatusCheck status_check_from_payload(const Json& payload, std::int64_t tick);

// Stage-2 output.
struct GuidanceText {
  std::string text;
  std::optional<Metric> focus_metric;
  bool pre_start = false;
};
Json guidance_payload(const GuidanceText& g);
GuidanceText guidance_from_payload(const Json& payload);  // throws MalformedResponse

struct GuidancePacket {
  std::int64_t tick = 0;
  std::optional<StickOp> stick_op;
  EmsMode ems_mode = EmsMode::rising;
  Trigger trigger = Trigger::correction;
  std::vector<Instrument> instruments;
  std::string rationale;
  std::vector<std::string> provenance;

  bool operator==(const GuidancePacket&) const = default;
};

// nullopt when pre_start => mode 3, correction => mode 2 and a correction
// names at least one instrument; else the violated rule.
std::optional<std::string> packet_violation(const GuidancePacket& p);
// {"packet": {...} | null}; tick and provenance are not part of the payload.
Json packet_payload(const std::optional<GuidancePacket>& p);
// Throws MalformedResponse for a structural problem, InvariantViolation when
// the packet breaks its invariants.
std::optional<GuidancePacket> packet_from_payload(const Json& payload, std::int64_t tick);
Json packet_to_json(const GuidancePacket& p);

struct BackendRequest {
  StageId stage = StageId::status_check;
  std::int64_t tick = 0;
  std::string prompt_id;
  std::string schema_id;
  std::string system_prompt;
  std::string user_prompt;
  // task, phase, state, report, context, status, guidance (as available).
  Json inputs;
};

struct BackendResponse {
  std::string raw_text;
  Json payload;
  double latency_ms = 0.0;
  std::string backend_id;
};

class Backend {
 public:
  virtual ~Backend() = default;
  // Throws BackendTimeout, ProviderUnavailable, MalformedResponse.
  virtual BackendResponse complete(const BackendRequest& request, Clock::time_point deadline) = 0;
  virtual std::string id() const = 0;
};

// Rule-based stand-in for the remote model: status from envelope flags,
// guidance from the control-axis table. Deterministic; reports zero latency.
class OracleBackend final : public Backend {
 public:
  BackendResponse complete(const BackendRequest& request, Clock::time_point deadline) override;
  std::string id() const override { return "oracle"; }
};

// OpenAI-compatible POST {base_url}/v1/chat/completions with a json_schema
// response format. Transport failures and 5xx replies are retried.
class RemoteChatBackend final : public Backend {
 public:
  struct Options {
    std::string base_url = "http://127.0.0.1:8000";
    std::string model = "gpt-4o";
    std::string api_key;
    std::chrono::milliseconds timeout{5000};
    int max_retries = 2;
  };
  explicit RemoteChatBackend(Options options);
  BackendResponse complete(const BackendRequest& request, Clock::time_point deadline) override;
  std::string id() const override { return "remote:" + options_.model; }

 private:
  Options options_;
};

// Sleeps before delegating. Used to exercise the deadline path.
class DelayedBackend final : public Backend {
 public:
  DelayedBackend(Backend& inner, std::chrono::milliseconds delay, std::set<StageId> stages = {});
  BackendResponse complete(const BackendRequest& request, Clock::time_point deadline) override;
  std::string id() const override { return "delayed:" + inner_.id(); }

 private:
  Backend& inner_;
  std::chrono::milliseconds delay_;
  std::set<StageId> stages_;  // empty: every stage
};

struct StageRecord {
  StageId stage = StageId::status_check;
  bool completed = false;
  Json payload;  // null when the stage produced nothing
  double latency_ms = 0.0;
  std::string backend_id;
  std::string error;  // Errc name, empty on success

  bool operator==(const StageRecord&) const = default;
};
using StageRecords = std::array<StageRecord, 3>;
StageRecords empty_stage_records();
Json stage_record_to_json(const StageRecord& r);
StageRecord stage_record_from_json(const Json& j);

struct ChainResult {
  std::int64_t tick = 0;
  AlignedContext context;
  StageRecords stages = empty_stage_records();
  std::optional<StatusCheck> status;
  std::optional<GuidanceText> guidance;
  // Set only when all three stages succeeded; may still be "no action".
  std::optional<GuidancePacket> packet;
  std::optional<Errc> error;
  std::string error_detail;

  bool complete() const noexcept { return !error.has_value(); }
  double latency_ms() const noexcept;
};

struct PipelineOptions {
  std::size_t top_k = 3;
  std::size_t context_budget = 1200;
  std::chrono::milliseconds deadline{800};
};

class GuidancePipeline {
 public:
  // `index` and `embedder` may be null: align then degrades to empty context.
  GuidancePipeline(TaskSpec spec, Backend& backend, const VectorIndex* index = nullptr,
                   Embedder* embedder = nullptr, PipelineOptions options = {});

  // Never throws; index errors set `degraded`.
  AlignedContext stage_align(const DeviationReport& report);

  using StageObserver = std::function<void(const StageRecord&)>;
  // align -> status check -> guidance -> format. Stops at the first failed
  // stage; a stage finishing after `deadline` counts as BackendTimeout.
  ChainResult run_chain(const FlightState& state, const DeviationReport& report, Clock::time_point deadline,
                        const StageObserver& observer = {});

  const TaskSpec& spec() const noexcept { return spec_; }
  const PipelineOptions& options() const noexcept { return options_; }
  Backend& backend() noexcept { return backend_; }

 private:
  StageRecord call_stage(StageId stage, std::int64_t tick, const Json& inputs, Clock::time_point deadline,
                         Clock::time_point started);

  TaskSpec spec_;
  Backend& backend_;
  const VectorIndex* index_;
  Embedder* embedder_;
  PipelineOptions options_;
};

// Runs one chain per tick with the pipeline deadline, at most one in flight.
// Results arriving after their deadline are dropped. A tick that finds the
// previous chain still running degrades without launching.
class ChainRunner {
 public:
  explicit ChainRunner(GuidancePipeline& pipeline);
  ~ChainRunner();
  ChainRunner(const ChainRunner&) = delete;
  ChainRunner& operator=(const ChainRunner&) = delete;

  ChainResult run(const FlightState& state, const DeviationReport& report);
  std::size_t discarded() const noexcept { return discarded_; }

 private:
  struct Progress {
    std::mutex mu;
    std::vector<StageRecord> done;
  };
  GuidancePipeline& pipeline_;
  std::future<ChainResult> inflight_;
  std::size_t discarded_ = 0;
};

struct ValidatorVerdict {
  bool c1 = false;  // all three stages completed
  bool c2 = false;  // every payload matches its schema, packet invariants hold
  bool c3 = false;  // outputs consistent with the flight state
  std::vector<std::string> notes;

  bool overall() const noexcept { return c1 && c2 && c3; }
  bool operator==(const ValidatorVerdict&) const = default;
};

// Recomputes every criterion from the report and the raw stage payloads.
ValidatorVerdict validate_record(const DeviationReport& report, const StageRecords& stages);
Json verdict_to_json(const ValidatorVerdict& v);
ValidatorVerdict verdict_from_json(const Json& j);

}  // namespace aerocue
