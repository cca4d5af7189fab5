#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aerocue/flight_state.hpp"
#include "aerocue/stick.hpp"

namespace aerocue {

// Keys a phase condition may test: any metric name, plus the tracker-derived
// quantities "t", "phase_elapsed_s" and "turn_progress_deg".
struct Predicate {
  enum class Op { ge, le, abs_ge, abs_le };
  std::string key;
  Op op = Op::ge;
  double value = 0.0;
};

// All predicates must hold. An empty condition holds trivially.
using Condition = std::vector<Predicate>;

struct MetricEnvelope {
  Metric metric = Metric::altitude_ft;
  double target = 0.0;
  double tolerance = 1.0;
  double weight = 1.0;
};

// What the synthetic trainee is trying to fly in a phase.
struct ControlTargets {
  enum class PitchMode { altitude, pitch, airspeed, vertical_speed };
  PitchMode pitch_mode = PitchMode::altitude;
  std::optional<double> altitude_ft;
  std::optional<double> pitch_deg;
  std::optional<double> ias_kt;
  std::optional<double> vs_fpm;
  std::optional<double> bank_deg;
  std::optional<double> heading_deg;
  double throttle = 0.0;
  // When set, throttle is trimmed around `throttle` to hold ias_kt.
  bool throttle_holds_speed = false;
};

struct PhaseSpec {
  std::string name;
  Condition entry;
  std::vector<MetricEnvelope> envelopes;
  // Stick direction the trainee should initiate on entering the phase.
  std::optional<StickOp> tendency;
  ControlTargets control;

  const MetricEnvelope* envelope_for(Metric m) const noexcept;
};

struct TaskSpec {
  std::string task_id;
  std::string display_name;
  std::vector<PhaseSpec> phases;
  // Evaluated while in the last phase.
  Condition completion;
  // Phase whose ticks feed the training metrics.
  std::string metrics_phase;
  // Completion time is counted from entry into this phase.
  std::string timing_start_phase;

  std::optional<std::size_t> phase_index(std::string_view name) const noexcept;
};

inline constexpr std::array<std::string_view, 4> kTaskIds = {
    "straight_level", "takeoff_climb", "steep_turn", "deadstick_landing"};

// Built-in specs. Throws UnknownTask.
TaskSpec load_task_spec(std::string_view task_id);
// Throws InvalidSpecFile.
TaskSpec load_task_spec_file(const std::filesystem::path& path);
TaskSpec task_spec_from_json(const Json& j);
Json task_spec_to_json(const TaskSpec& spec);

struct MetricDeviation {
  Metric metric = Metric::altitude_ft;
  double value = 0.0;
  double target = 0.0;
  double deviation = 0.0;  // value - target; shortest arc for heading
  double tolerance = 1.0;
  double weight = 1.0;
  bool in_band = true;
  bool trend = false;  // |deviation| grew on each of the last trend-window ticks
  double severity() const noexcept;  // weight * |deviation| / tolerance
};

struct PhaseEvent {
  std::size_t from_phase = 0;
  std::size_t to_phase = 0;
  std::string phase_name;
  std::optional<StickOp> tendency;
};

struct DeviationReport {
  std::int64_t tick = 0;
  std::size_t phase_index = 0;
  std::string phase_name;
  std::vector<MetricDeviation> deviations;
  std::optional<Metric> worst;
  std::optional<PhaseEvent> phase_event;
  bool task_complete = false;

  bool any_out_of_band() const noexcept;
  const MetricDeviation* find(Metric m) const noexcept;
};

// Fixed priority for equal severities: altitude > bank > airspeed > heading,
// then the remaining metrics in declaration order.
int worst_offender_priority(Metric m) noexcept;

struct EvaluateOptions {
  std::size_t trend_ticks = 3;
};

// Pure. `history` holds earlier states, oldest first (at most a few ticks).
DeviationReport evaluate(const FlightState& state, const TaskSpec& spec, std::size_t phase,
                         std::span<const FlightState> history, std::int64_t tick = 0,
                         const EvaluateOptions& options = {});

double signed_deviation(Metric m, double value, double target) noexcept;

// Mutable per-session phase bookkeeping.
struct PhaseProgress {
  std::size_t phase = 0;
  double phase_entry_t = 0.0;
  double start_t = 0.0;
  double turn_progress_deg = 0.0;
  std::optional<double> last_heading;
  bool complete = false;
  std::optional<std::int64_t> complete_tick;
  std::vector<std::int64_t> phase_entry_ticks;  // index = phase
};

struct PhaseTransition {
  enum class Kind { stay, advance, complete };
  Kind kind = Kind::stay;
  std::optional<PhaseEvent> event;  // set on advance
};

// Looks only at `state` and `progress`; StandardsTracker folds the result into
// its progress. Never skips a phase and never regresses.
PhaseTransition advance_phase(const FlightState& state, const TaskSpec& spec,
                              const PhaseProgress& progress);
bool condition_holds(const Condition& c, const FlightState& state, const PhaseProgress& progress);

// Runs the per-tick standards step: accumulate turn, transition, evaluate.
class StandardsTracker {
 public:
  explicit StandardsTracker(TaskSpec spec, std::size_t history_window = 5,
                            EvaluateOptions options = {});

  DeviationReport step(std::int64_t tick, const FlightState& state);

  const TaskSpec& spec() const noexcept { return spec_; }
  const PhaseProgress& progress() const noexcept { return progress_; }
  const PhaseSpec& current_phase() const noexcept { return spec_.phases[progress_.phase]; }

 private:
  TaskSpec spec_;
  std::size_t history_window_;
  EvaluateOptions options_;
  PhaseProgress progress_;
  std::deque<FlightState> history_;
  bool started_ = false;
};

Json report_to_json(const DeviationReport& r);
DeviationReport report_from_json(const Json& j);

}  // namespace aerocue
