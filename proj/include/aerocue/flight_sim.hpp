#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "aerocue/flight_state.hpp"
#include "aerocue/task_standards.hpp"

namespace aerocue {

struct EmsCommand;

inline constexpr double kGravity = 9.80665;     // m/s^2
inline constexpr double kKnotToMs = 0.514444;   // m/s per knot
inline constexpr double kFootToM = 0.3048;
inline constexpr double kFpmPerMs = 196.850394;

// Point-mass aircraft roughly in the DA40 class. Drag is expressed per unit
// mass: D/m = parasite_k0 * V^2 + induced_k1 * n^2 / V^2 (V in m/s).
struct AircraftParams {
  double mass_kg = 1150.0;
  double max_thrust_n = 2200.0;
  double parasite_k0 = 3.27e-4;
  double induced_k1 = 490.0;
  // Angle of attack needed for 1 g: alpha = lift_alpha_coeff / V^2 (rad).
  double lift_alpha_coeff = 188.0;
  double roll_rate_max_dps = 30.0;
  double pitch_rate_max_dps = 8.0;
  double stall_ias_kt = 49.0;
  double vne_kt = 178.0;

  // Throws InvalidScenario when a field is non-positive or stall >= vne.
  void validate() const;
  double alpha_max_rad() const noexcept;
};

// Air mass and disturbance inputs held constant over one integration step.
struct Environment {
  double wind_north_ms = 0.0;
  double wind_east_ms = 0.0;
  double updraft_ms = 0.0;
  double gust_roll_rate_dps = 0.0;
  double thrust_factor = 1.0;
  double ground_elevation_ft = 0.0;
};

struct StepResult {
  FlightState state;
  bool stalled = false;
  bool on_ground = false;
};

// One RK4 step of length dt (0, 1] seconds. Deterministic.
// Throws NonFiniteState if integration produces NaN/Inf.
StepResult step(const FlightState& state, const ControlInput& input, const AircraftParams& params,
                const Environment& env, double dt);

struct TrimPoint {
  FlightState state;
  ControlInput input;
};

// Wings-level unaccelerated flight. Throws TrimNotFound.
TrimPoint trim_level(double ias_kt, double altitude_ft, const AircraftParams& params);

enum class ScenarioCondition { normal, abnormal };
std::string_view to_string(ScenarioCondition c) noexcept;

struct Disturbance {
  enum class Kind { lateral_gust, throttle_decay, updraft };
  Kind kind = Kind::lateral_gust;
  double start_s = 0.0;
  double duration_s = 0.0;
  // lateral_gust: roll rate, deg/s. throttle_decay: thrust fraction lost.
  // updraft: vertical air velocity, m/s (negative = downdraft).
  double magnitude = 0.0;

  bool active_at(double t) const noexcept { return t >= start_s && t < start_s + duration_s; }
};

struct Scenario {
  std::string name;
  std::string task_id;
  ScenarioCondition condition = ScenarioCondition::normal;
  FlightState initial;
  double initial_throttle = 0.0;
  std::vector<Disturbance> disturbances;
  int duration_s = 60;
  bool engine_out = false;
  bool end_on_touchdown = false;
  double wind_north_ms = 0.0;
  double wind_east_ms = 0.0;
  double ground_elevation_ft = 0.0;

  // Throws InvalidScenario; normal scenarios have no disturbances, abnormal
  // ones at least one.
  void validate() const;
  Environment environment_at(double t) const noexcept;
};

Scenario scenario_from_json(const Json& j, const AircraftParams& params = {});
Scenario load_scenario_file(const std::filesystem::path& path, const AircraftParams& params = {});
// Built-in scenarios shipped under resources/scenarios, sorted by name.
std::vector<std::string> builtin_scenario_names();
Scenario load_builtin_scenario(std::string_view name, const AircraftParams& params = {});

struct TraineeSkill {
  double gain_error = 1.0;
  double reaction_delay_s = 0.0;
  double noise_sigma = 0.0;
  double compliance = 1.0;

  void validate() const;  // throws ConfigInvalid
};

// PD pursuit of the phase targets on the (possibly delayed) observed state.
// `noise` is added to both stick axes before the nudge is blended in:
// output = own + compliance * nudge, clamped to the control ranges.
ControlInput trainee_step(const ControlTargets& targets, const FlightState& observed,
                          const TraineeSkill& skill, const std::optional<ControlInput>& nudge,
                          double noise_x = 0.0, double noise_y = 0.0);

// Owns the reaction-delay buffer and a seeded RNG around trainee_step.
class SyntheticTrainee {
 public:
  SyntheticTrainee(TraineeSkill skill, std::uint64_t seed);

  // Call once per control update with the true state.
  ControlInput update(const FlightState& truth, const ControlTargets& targets,
                      const std::optional<ControlInput>& nudge);

  const TraineeSkill& skill() const noexcept { return skill_; }

 private:
  TraineeSkill skill_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_{0.0, 1.0};
  std::deque<FlightState> buffer_;
};

struct ScenarioTick {
  TelemetryRecord record;
  ControlInput control;  // control held at the end of the tick
  bool disturbed = false;
  bool stalled = false;
};

// Tick-by-tick closed loop: 20 RK4 substeps per 1 Hz tick, trainee or
// externally supplied controls, EMS nudges applied while their commands run.
class SimulationSession {
 public:
  static constexpr int kSubsteps = 20;
  static constexpr int kTraineeEvery = 4;  // trainee updates at 5 Hz

  SimulationSession(Scenario scenario, TaskSpec spec, TraineeSkill skill, std::uint64_t seed,
                    AircraftParams params = {});

  // Advances one second. Throws SourceExhausted when the scenario is over.
  ScenarioTick advance();
  bool finished() const noexcept;

  // Commands emitted at the tick just returned; their nudges start now.
  void apply_commands(const std::vector<EmsCommand>& commands);

  // Interactive mode: the trainee is bypassed and this input is used from the
  // next substep on.
  void set_external_control(const ControlInput& input);
  void clear_external_control();

  std::int64_t tick() const noexcept { return tick_; }
  const FlightState& state() const noexcept { return state_; }
  const Scenario& scenario() const noexcept { return scenario_; }
  // Phase the trainee is flying, driven by the same tracker as the session.
  void set_phase(std::size_t phase) noexcept { phase_ = phase; }

 private:
  struct ActiveNudge {
    double start_t;
    double end_t;
    ControlInput delta;
  };

  Scenario scenario_;
  TaskSpec spec_;
  AircraftParams params_;
  SyntheticTrainee trainee_;
  FlightState state_;
  ControlInput control_;
  std::optional<ControlInput> external_;
  std::vector<ActiveNudge> nudges_;
  std::int64_t tick_ = 0;
  std::size_t phase_ = 0;
  bool touched_down_ = false;
};

struct ScenarioRun {
  std::vector<ScenarioTick> ticks;
};

// Called once per tick with the fresh record; returns EMS commands to nudge with.
using AssistHook = std::function<std::vector<EmsCommand>(const TelemetryRecord&)>;

// assist=off is an empty hook. The trainee follows the phase machine of `spec`.
ScenarioRun run_scenario(const Scenario& scenario, const TaskSpec& spec, const TraineeSkill& skill,
                         const AssistHook& assist, std::uint64_t seed,
                         const AircraftParams& params = {});

}  // namespace aerocue
