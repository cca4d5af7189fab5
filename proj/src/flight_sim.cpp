#include "aerocue/flight_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "aerocue/ems_control.hpp"
#include "aerocue/error.hpp"
#include "aerocue/resources.hpp"

namespace aerocue {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr double kMinSpeedMs = 1.0;
constexpr double kMinCosBank = 0.1;

// Integration state, SI units and radians.
struct Air {
  double h = 0.0;
  double v = 0.0;
  double theta = 0.0;
  double phi = 0.0;
  double psi = 0.0;
};

Air operator+(const Air& a, const Air& b) {
  return {a.h + b.h, a.v + b.v, a.theta + b.theta, a.phi + b.phi, a.psi + b.psi};
}
Air operator*(double k, const Air& a) { return {k * a.h, k * a.v, k * a.theta, k * a.phi, k * a.psi}; }

struct Forces {
  double gamma = 0.0;       // flight-path angle
  double hdot = 0.0;
  double vdot = 0.0;
  double specific_thrust = 0.0;
  double specific_drag = 0.0;
  double cos_bank = 1.0;
  bool on_ground = false;
  bool alpha_limited = false;
};

Forces forces(const Air& x, const ControlInput& u, const AircraftParams& p, const Environment& env) {
  Forces f;
  const double v = std::max(x.v, kMinSpeedMs);
  f.cos_bank = std::max(std::cos(x.phi), kMinCosBank);
  double alpha = p.lift_alpha_coeff / (v * v * f.cos_bank);
  if (alpha > p.alpha_max_rad()) {
    alpha = p.alpha_max_rad();
    f.alpha_limited = true;
  }
  f.gamma = x.theta - alpha;
  const double speed = std::max(x.v, 0.0);
  double n = 1.0 / f.cos_bank;
  f.specific_thrust = u.throttle * p.max_thrust_n * env.thrust_factor / p.mass_kg;
  f.hdot = speed * std::sin(f.gamma) + env.updraft_ms;
  double gamma_eff = f.gamma;
  const double ground_m = env.ground_elevation_ft * kFootToM;
  if (x.h <= ground_m && f.hdot <= 0.0) {
    f.on_ground = true;
    f.hdot = 0.0;
    gamma_eff = 0.0;
    // The wheels carry the weight the wing does not lift at the ground attitude.
    n = std::clamp(std::max(x.theta, 0.0) * v * v / p.lift_alpha_coeff, 0.0, 1.0);
  }
  f.specific_drag = p.parasite_k0 * speed * speed + p.induced_k1 * n * n / (v * v);
  f.vdot = f.specific_thrust - f.specific_drag - kGravity * std::sin(gamma_eff);
  // Cannot roll backwards on the runway.
  if (f.on_ground && x.v <= 0.0 && f.vdot < 0.0) f.vdot = 0.0;
  return f;
}

Air derivative(const Air& x, const ControlInput& u, const AircraftParams& p, const Environment& env) {
  const Forces f = forces(x, u, p, env);
  Air d;
  d.h = f.hdot;
  d.v = f.vdot;
  d.theta = u.stick_y * p.pitch_rate_max_dps * kDegToRad;
  d.phi = u.stick_x * p.roll_rate_max_dps * kDegToRad + env.gust_roll_rate_dps * kDegToRad;
  d.psi = f.on_ground ? 0.0 : kGravity * std::tan(x.phi) / std::max(x.v, kMinSpeedMs);
  return d;
}

Air to_air(const FlightState& s) {
  return {s.altitude_ft * kFootToM, s.ias_kt * kKnotToMs, s.pitch_deg * kDegToRad,
          s.bank_deg * kDegToRad, s.heading_deg * kDegToRad};
}

// Fills every FlightState field from the integration state.
FlightState to_state(const Air& x, double t, const ControlInput& u, const AircraftParams& p,
                     const Environment& env, bool* on_ground) {
  const Forces f = forces(x, u, p, env);
  FlightState s;
  s.t = t;
  s.altitude_ft = x.h / kFootToM;
  s.ias_kt = std::max(0.0, x.v) / kKnotToMs;
  s.pitch_deg = x.theta * kRadToDeg;
  s.bank_deg = x.phi * kRadToDeg;
  s.heading_deg = x.psi * kRadToDeg;
  s.vs_fpm = f.hdot * kFpmPerMs;
  const double horiz = std::max(0.0, x.v) * std::cos(f.gamma);
  const double north = horiz * std::cos(x.psi) + env.wind_north_ms;
  const double east = horiz * std::sin(x.psi) + env.wind_east_ms;
  s.gs_kt = std::hypot(north, east) / kKnotToMs;
  s.accel_lon_g = (f.specific_thrust - f.specific_drag) / kGravity;
  s.accel_lat_g = env.gust_roll_rate_dps * 0.01;
  s.accel_vert_g = f.on_ground ? 1.0 : std::cos(f.gamma) / f.cos_bank;
  if (on_ground != nullptr) *on_ground = f.on_ground;
  for (Metric m : kAllMetrics) {
    if (!std::isfinite(s.get(m))) throw Error(Errc::NonFiniteState, std::string(metric_name(m)));
  }
  return normalize(s);
}

}  // namespace

void AircraftParams::validate() const {
  const double fields[] = {mass_kg,           max_thrust_n,       parasite_k0,
                           induced_k1,        lift_alpha_coeff,   roll_rate_max_dps,
                           pitch_rate_max_dps, stall_ias_kt,      vne_kt};
  for (double f : fields) {
    if (!(f > 0.0) || !std::isfinite(f)) throw Error(Errc::InvalidScenario, "aircraft parameters must be positive");
  }
  if (stall_ias_kt >= vne_kt) throw Error(Errc::InvalidScenario, "stall speed must be below vne");
}

double AircraftParams::alpha_max_rad() const noexcept {
  const double vs = stall_ias_kt * kKnotToMs;
  return lift_alpha_coeff / (vs * vs);
}

StepResult step(const FlightState& state, const ControlInput& input, const AircraftParams& params,
                const Environment& env, double dt) {
  if (!(dt > 0.0 && dt <= 1.0)) throw Error(Errc::InvalidScenario, "dt must be in (0, 1]");
  const ControlInput u = input.clamped();
  const Air x0 = to_air(state);
  const Air k1 = derivative(x0, u, params, env);
  const Air k2 = derivative(x0 + (0.5 * dt) * k1, u, params, env);
  const Air k3 = derivative(x0 + (0.5 * dt) * k2, u, params, env);
  const Air k4 = derivative(x0 + dt * k3, u, params, env);
  Air x1 = x0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  const double ground_m = env.ground_elevation_ft * kFootToM;
  if (x1.h < ground_m) x1.h = ground_m;
  if (x1.v < 0.0) x1.v = 0.0;

  StepResult r;
  r.state = to_state(x1, state.t + dt, u, params, env, &r.on_ground);
  r.stalled = !r.on_ground && r.state.ias_kt < params.stall_ias_kt;
  return r;
}

TrimPoint trim_level(double ias_kt, double altitude_ft, const AircraftParams& params) {
  params.validate();
  if (!(ias_kt >= 1.2 * params.stall_ias_kt) || !(ias_kt <= params.vne_kt))
    throw Error(Errc::TrimNotFound, "airspeed outside the trimmable range");
  const double v = ias_kt * kKnotToMs;
  // Level, wings-level equilibrium: gamma = 0 gives pitch = alpha, and
  // thrust balances drag.
  const double alpha = params.lift_alpha_coeff / (v * v);
  const double drag = params.parasite_k0 * v * v + params.induced_k1 / (v * v);
  const double throttle = drag * params.mass_kg / params.max_thrust_n;
  if (alpha > params.alpha_max_rad() || throttle > 1.0)
    throw Error(Errc::TrimNotFound, "no level equilibrium at this airspeed");

  TrimPoint tp;
  tp.input = ControlInput{0.0, 0.0, throttle};
  Air x{altitude_ft * kFootToM, v, alpha, 0.0, 0.0};
  tp.state = to_state(x, 0.0, tp.input, params, Environment{}, nullptr);
  return tp;
}

std::string_view to_string(ScenarioCondition c) noexcept {
  return c == ScenarioCondition::normal ? "normal" : "abnormal";
}

void Scenario::validate() const {
  if (duration_s <= 0) throw Error(Errc::InvalidScenario, name + ": duration must be positive");
  if (condition == ScenarioCondition::normal && !disturbances.empty())
    throw Error(Errc::InvalidScenario, name + ": normal scenarios carry no disturbances");
  if (condition == ScenarioCondition::abnormal && disturbances.empty())
    throw Error(Errc::InvalidScenario, name + ": abnormal scenarios need a disturbance");
  for (const auto& d : disturbances) {
    if (!(d.duration_s > 0.0) || !std::isfinite(d.magnitude))
      throw Error(Errc::InvalidScenario, name + ": malformed disturbance");
  }
}

Environment Scenario::environment_at(double t) const noexcept {
  Environment env;
  env.wind_north_ms = wind_north_ms;
  env.wind_east_ms = wind_east_ms;
  env.ground_elevation_ft = ground_elevation_ft;
  for (const auto& d : disturbances) {
    if (!d.active_at(t)) continue;
    switch (d.kind) {
      case Disturbance::Kind::lateral_gust: env.gust_roll_rate_dps += d.magnitude; break;
      case Disturbance::Kind::throttle_decay:
        env.thrust_factor *= std::clamp(1.0 - d.magnitude, 0.0, 1.0);
        break;
      case Disturbance::Kind::updraft: env.updraft_ms += d.magnitude; break;
    }
  }
  if (engine_out) env.thrust_factor = 0.0;
  return env;
}

Scenario scenario_from_json(const Json& j, const AircraftParams& params) {
  try {
    Scenario sc;
    sc.name = j.value("name", std::string("scenario"));
    sc.task_id = j.at("task_id").get<std::string>();
    const std::string cond = j.at("condition").get<std::string>();
    if (cond == "normal") sc.condition = ScenarioCondition::normal;
    else if (cond == "abnormal") sc.condition = ScenarioCondition::abnormal;
    else throw Error(Errc::InvalidScenario, "unknown condition " + cond);
    sc.duration_s = j.at("duration_s").get<int>();
    sc.engine_out = j.value("engine_out", false);
    sc.end_on_touchdown = j.value("end_on_touchdown", false);
    sc.ground_elevation_ft = j.value("ground_elevation_ft", 0.0);
    if (auto w = j.find("wind"); w != j.end()) {
      sc.wind_north_ms = w->value("north_ms", 0.0);
      sc.wind_east_ms = w->value("east_ms", 0.0);
    }

    const Json& init = j.at("initial");
    const double alt = init.at("altitude_ft").get<double>();
    const double ias = init.at("ias_kt").get<double>();
    if (init.value("trim", false)) {
      TrimPoint tp = trim_level(ias, alt, params);
      sc.initial = tp.state;
      sc.initial_throttle = tp.input.throttle;
    } else {
      sc.initial.altitude_ft = alt;
      sc.initial.ias_kt = ias;
      sc.initial.pitch_deg = init.value("pitch_deg", 0.0);
      sc.initial.bank_deg = init.value("bank_deg", 0.0);
      sc.initial.gs_kt = ias;
      sc.initial_throttle = init.value("throttle", 0.0);
    }
    sc.initial.heading_deg = init.value("heading_deg", 0.0);
    if (auto it = init.find("bank_deg"); it != init.end()) sc.initial.bank_deg = it->get<double>();
    if (auto it = init.find("throttle"); it != init.end()) sc.initial_throttle = it->get<double>();
    sc.initial.t = 0.0;
    sc.initial = normalize(sc.initial);

    for (const auto& dj : j.value("disturbances", Json::array())) {
      Disturbance d;
      const std::string kind = dj.at("kind").get<std::string>();
      if (kind == "lateral_gust") d.kind = Disturbance::Kind::lateral_gust;
      else if (kind == "throttle_decay") d.kind = Disturbance::Kind::throttle_decay;
      else if (kind == "updraft") d.kind = Disturbance::Kind::updraft;
      else throw Error(Errc::InvalidScenario, "unknown disturbance " + kind);
      d.start_s = dj.at("start_s").get<double>();
      d.duration_s = dj.at("duration_s").get<double>();
      d.magnitude = dj.at("magnitude").get<double>();
      sc.disturbances.push_back(d);
    }
    sc.validate();
    return sc;
  } catch (const Json::exception& e) {
    throw Error(Errc::InvalidScenario, e.what());
  }
}

Scenario load_scenario_file(const std::filesystem::path& path, const AircraftParams& params) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidScenario, "cannot open " + path.string());
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::InvalidScenario, path.string() + " is not JSON");
  return scenario_from_json(j, params);
}

std::vector<std::string> builtin_scenario_names() {
  std::vector<std::string> names;
  for (const auto& path : list_resources("scenarios/")) {
    std::string stem = std::filesystem::path(path).stem().string();
    names.push_back(stem);
  }
  return names;
}

Scenario load_builtin_scenario(std::string_view name, const AircraftParams& params) {
  auto text = find_resource("scenarios/" + std::string(name) + ".json");
  if (!text) throw Error(Errc::InvalidScenario, "no built-in scenario " + std::string(name));
  Json j = Json::parse(*text, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::InvalidScenario, std::string(name) + " is not JSON");
  return scenario_from_json(j, params);
}

void TraineeSkill::validate() const {
  if (!(compliance >= 0.0 && compliance <= 1.0))
    throw Error(Errc::ConfigInvalid, "compliance must be in [0, 1]");
  if (!(reaction_delay_s >= 0.0)) throw Error(Errc::ConfigInvalid, "reaction delay must be >= 0");
  if (!(noise_sigma >= 0.0)) throw Error(Errc::ConfigInvalid, "noise sigma must be >= 0");
  if (!(gain_error > 0.0)) throw Error(Errc::ConfigInvalid, "gain_error must be positive");
}

ControlInput trainee_step(const ControlTargets& targets, const FlightState& observed,
                          const TraineeSkill& skill, const std::optional<ControlInput>& nudge,
                          double noise_x, double noise_y) {
  const double gain = skill.gain_error;

  // Lateral: bank toward the commanded bank, or toward the heading target.
  double bank_cmd = 0.0;
  if (targets.bank_deg) {
    bank_cmd = *targets.bank_deg;
  } else if (targets.heading_deg) {
    const double heading_error = -circular_difference(observed.heading_deg, *targets.heading_deg);
    bank_cmd = std::clamp(heading_error, -25.0, 25.0);
  }
  double stick_x = gain * 0.04 * (bank_cmd - observed.bank_deg);

  // Vertical. The stick commands pitch rate, so each mode closes a loop on
  // the quantity it tracks with the rate of the next one down as damping.
  double stick_y = 0.0;
  const auto vs_loop = [&](double vs_target) { return gain * 3.5e-4 * (vs_target - observed.vs_fpm); };
  const auto pitch_loop = [&](double pitch_target) { return gain * 0.15 * (pitch_target - observed.pitch_deg); };
  switch (targets.pitch_mode) {
    case ControlTargets::PitchMode::altitude: {
      const double alt_error = targets.altitude_ft.value_or(observed.altitude_ft) - observed.altitude_ft;
      if (targets.pitch_deg) {
        // Flies the level attitude picture with a proportional correction and
        // no integral action, so a sustained load change leaves a sag.
        const double correction = gain * (0.012 * alt_error - 0.001 * observed.vs_fpm);
        stick_y = pitch_loop(*targets.pitch_deg + std::clamp(correction, -6.0, 6.0));
      } else {
        stick_y = vs_loop(std::clamp(4.0 * alt_error, -800.0, 800.0));
      }
      break;
    }
    case ControlTargets::PitchMode::pitch:
      stick_y = pitch_loop(targets.pitch_deg.value_or(observed.pitch_deg));
      break;
    case ControlTargets::PitchMode::airspeed: {
      const double ref = targets.pitch_deg.value_or(0.0);
      const double speed_error = observed.ias_kt - targets.ias_kt.value_or(observed.ias_kt);
      stick_y = pitch_loop(std::clamp(ref + 0.6 * speed_error, ref - 8.0, ref + 8.0));
      break;
    }
    case ControlTargets::PitchMode::vertical_speed:
      stick_y = vs_loop(targets.vs_fpm.value_or(0.0));
      break;
  }

  double throttle = targets.throttle;
  if (targets.throttle_holds_speed && targets.ias_kt) {
    throttle += gain * 0.03 * (*targets.ias_kt - observed.ias_kt);
  }

  ControlInput own = ControlInput{stick_x + noise_x, stick_y + noise_y, throttle}.clamped();
  if (!nudge) return own;
  const double c = skill.compliance;
  return ControlInput{own.stick_x + c * nudge->stick_x, own.stick_y + c * nudge->stick_y,
                      own.throttle + c * nudge->throttle}
      .clamped();
}

SyntheticTrainee::SyntheticTrainee(TraineeSkill skill, std::uint64_t seed)
    : skill_(skill), rng_(seed) {
  skill_.validate();
}

ControlInput SyntheticTrainee::update(const FlightState& truth, const ControlTargets& targets,
                                      const std::optional<ControlInput>& nudge) {
  buffer_.push_back(truth);
  const double seen_at = truth.t - skill_.reaction_delay_s;
  // Keep the newest sample at or before the reaction horizon at the front.
  while (buffer_.size() > 1 && buffer_[1].t <= seen_at + 1e-9) buffer_.pop_front();
  const FlightState& observed = buffer_.front();

  double nx = 0.0;
  double ny = 0.0;
  if (skill_.noise_sigma > 0.0) {
    nx = skill_.noise_sigma * noise_(rng_);
    ny = skill_.noise_sigma * noise_(rng_);
  }
  return trainee_step(targets, observed, skill_, nudge, nx, ny);
}

SimulationSession::SimulationSession(Scenario scenario, TaskSpec spec, TraineeSkill skill,
                                     std::uint64_t seed, AircraftParams params)
    : scenario_(std::move(scenario)),
      spec_(std::move(spec)),
      params_(params),
      trainee_(skill, seed),
      state_(scenario_.initial) {
  params_.validate();
  scenario_.validate();
  control_.throttle = scenario_.initial_throttle;
}

bool SimulationSession::finished() const noexcept {
  return tick_ >= scenario_.duration_s || touched_down_;
}

void SimulationSession::apply_commands(const std::vector<EmsCommand>& commands) {
  for (const auto& cmd : commands) {
    const double start = cmd.start_ms() / 1000.0;
    nudges_.push_back({start, start + cmd.envelope.duration_ms / 1000.0, nudge_of(cmd)});
  }
}

void SimulationSession::set_external_control(const ControlInput& input) { external_ = input.clamped(); }
void SimulationSession::clear_external_control() { external_.reset(); }

ScenarioTick SimulationSession::advance() {
  if (finished()) throw Error(Errc::SourceExhausted, scenario_.name);
  constexpr double dt = 1.0 / kSubsteps;
  const ControlTargets& targets = spec_.phases.at(std::min(phase_, spec_.phases.size() - 1)).control;
  ScenarioTick out;
  const bool was_airborne = state_.altitude_ft > scenario_.ground_elevation_ft;

  for (int i = 0; i < kSubsteps; ++i) {
    const double t = static_cast<double>(tick_) + i * dt;
    state_.t = t;
    std::optional<ControlInput> nudge;
    for (const auto& n : nudges_) {
      if (t + 1e-9 >= n.start_t && t < n.end_t - 1e-9) {
        ControlInput sum = nudge.value_or(ControlInput{});
        sum.stick_x += n.delta.stick_x;
        sum.stick_y += n.delta.stick_y;
        nudge = sum;
      }
    }
    if (external_) {
      control_ = *external_;
    } else if (i % kTraineeEvery == 0) {
      control_ = trainee_.update(state_, targets, nudge);
    }
    const Environment env = scenario_.environment_at(t);
    for (const auto& d : scenario_.disturbances) out.disturbed = out.disturbed || d.active_at(t);
    StepResult r = step(state_, control_, params_, env, dt);
    state_ = r.state;
    out.stalled = out.stalled || r.stalled;
    if (scenario_.end_on_touchdown && was_airborne && r.on_ground) touched_down_ = true;
  }
  ++tick_;
  state_.t = static_cast<double>(tick_);
  std::erase_if(nudges_, [&](const ActiveNudge& n) { return n.end_t <= state_.t; });

  out.record.tick = tick_;
  out.record.state = state_;
  out.record.source = TelemetrySource::sim;
  out.control = control_;
  return out;
}

ScenarioRun run_scenario(const Scenario& scenario, const TaskSpec& spec, const TraineeSkill& skill,
                         const AssistHook& assist, std::uint64_t seed, const AircraftParams& params) {
  SimulationSession sim(scenario, spec, skill, seed, params);
  StandardsTracker tracker(spec);
  ScenarioRun run;
  while (!sim.finished()) {
    ScenarioTick tick = sim.advance();
    tracker.step(tick.record.tick, tick.record.state);
    sim.set_phase(tracker.progress().phase);
    if (assist) sim.apply_commands(assist(tick.record));
    run.ticks.push_back(std::move(tick));
  }
  return run;
}

}  // namespace aerocue
