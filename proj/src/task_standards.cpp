#include "aerocue/task_standards.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "aerocue/error.hpp"
#include "aerocue/resources.hpp"

namespace aerocue {

namespace {

std::string_view op_name(Predicate::Op op) {
  switch (op) {
    case Predicate::Op::ge: return "ge";
    case Predicate::Op::le: return "le";
    case Predicate::Op::abs_ge: return "abs_ge";
    case Predicate::Op::abs_le: return "abs_le";
  }
  return "ge";
}

std::optional<Predicate::Op> op_from(std::string_view s) {
  if (s == "ge") return Predicate::Op::ge;
  if (s == "le") return Predicate::Op::le;
  if (s == "abs_ge") return Predicate::Op::abs_ge;
  if (s == "abs_le") return Predicate::Op::abs_le;
  return std::nullopt;
}

bool valid_key(std::string_view key) {
  return key == "t" || key == "phase_elapsed_s" || key == "turn_progress_deg" ||
         metric_from_name(key).has_value();
}

[[noreturn]] void bad_spec(const std::string& what) { throw Error(Errc::InvalidSpecFile, what); }

Condition condition_from_json(const Json& j, const std::string& where) {
  Condition c;
  if (j.is_null()) return c;
  if (!j.is_array()) bad_spec(where + ": condition must be an array");
  for (const auto& p : j) {
    Predicate pred;
    pred.key = p.at("key").get<std::string>();
    if (!valid_key(pred.key)) bad_spec(where + ": unknown condition key " + pred.key);
    auto op = op_from(p.at("op").get<std::string>());
    if (!op) bad_spec(where + ": unknown op");
    pred.op = *op;
    pred.value = p.at("value").get<double>();
    c.push_back(std::move(pred));
  }
  return c;
}

Json condition_to_json(const Condition& c) {
  Json arr = Json::array();
  for (const auto& p : c) arr.push_back({{"key", p.key}, {"op", op_name(p.op)}, {"value", p.value}});
  return arr;
}

std::string_view pitch_mode_name(ControlTargets::PitchMode m) {
  switch (m) {
    case ControlTargets::PitchMode::altitude: return "altitude";
    case ControlTargets::PitchMode::pitch: return "pitch";
    case ControlTargets::PitchMode::airspeed: return "airspeed";
    case ControlTargets::PitchMode::vertical_speed: return "vertical_speed";
  }
  return "altitude";
}

ControlTargets targets_from_json(const Json& j) {
  ControlTargets c;
  if (j.is_null()) return c;
  auto opt = [&](const char* key) -> std::optional<double> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<double>();
  };
  std::string mode = j.value("pitch_mode", std::string("altitude"));
  if (mode == "altitude") c.pitch_mode = ControlTargets::PitchMode::altitude;
  else if (mode == "pitch") c.pitch_mode = ControlTargets::PitchMode::pitch;
  else if (mode == "airspeed") c.pitch_mode = ControlTargets::PitchMode::airspeed;
  else if (mode == "vertical_speed") c.pitch_mode = ControlTargets::PitchMode::vertical_speed;
  else bad_spec("unknown pitch_mode " + mode);
  c.altitude_ft = opt("altitude_ft");
  c.pitch_deg = opt("pitch_deg");
  c.ias_kt = opt("ias_kt");
  c.vs_fpm = opt("vs_fpm");
  c.bank_deg = opt("bank_deg");
  c.heading_deg = opt("heading_deg");
  c.throttle = j.value("throttle", 0.0);
  c.throttle_holds_speed = j.value("throttle_holds_speed", false);
  return c;
}

Json targets_to_json(const ControlTargets& c) {
  Json j = Json::object();
  j["pitch_mode"] = pitch_mode_name(c.pitch_mode);
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  put("altitude_ft", c.altitude_ft);
  put("pitch_deg", c.pitch_deg);
  put("ias_kt", c.ias_kt);
  put("vs_fpm", c.vs_fpm);
  put("bank_deg", c.bank_deg);
  put("heading_deg", c.heading_deg);
  j["throttle"] = c.throttle;
  j["throttle_holds_speed"] = c.throttle_holds_speed;
  return j;
}

double condition_value(const std::string& key, const FlightState& s, const PhaseProgress& p) {
  if (key == "t") return s.t;
  if (key == "phase_elapsed_s") return s.t - p.phase_entry_t;
  if (key == "turn_progress_deg") return p.turn_progress_deg;
  return s.get(*metric_from_name(key));
}

}  // namespace

const MetricEnvelope* PhaseSpec::envelope_for(Metric m) const noexcept {
  for (const auto& e : envelopes) {
    if (e.metric == m) return &e;
  }
  return nullptr;
}

std::optional<std::size_t> TaskSpec::phase_index(std::string_view name) const noexcept {
  for (std::size_t i = 0; i < phases.size(); ++i) {
    if (phases[i].name == name) return i;
  }
  return std::nullopt;
}

TaskSpec task_spec_from_json(const Json& j) {
  try {
    TaskSpec spec;
    spec.task_id = j.at("task_id").get<std::string>();
    spec.display_name = j.value("display_name", spec.task_id);
    const Json& phases = j.at("phases");
    if (!phases.is_array() || phases.empty()) bad_spec("task needs at least one phase");
    for (const auto& pj : phases) {
      PhaseSpec ph;
      ph.name = pj.at("name").get<std::string>();
      ph.entry = condition_from_json(pj.value("entry", Json()), ph.name);
      if (!spec.phases.empty() && ph.entry.empty())
        bad_spec(ph.name + ": phases after the first need an entry condition");
      for (const auto& ej : pj.at("envelopes")) {
        MetricEnvelope env;
        auto m = metric_from_name(ej.at("metric").get<std::string>());
        if (!m) bad_spec(ph.name + ": unknown metric " + ej.at("metric").get<std::string>());
        env.metric = *m;
        env.target = ej.at("target").get<double>();
        env.tolerance = ej.at("tolerance").get<double>();
        env.weight = ej.value("weight", 1.0);
        if (!(env.tolerance > 0.0)) bad_spec(ph.name + ": tolerance must be positive");
        if (!(env.weight > 0.0)) bad_spec(ph.name + ": weight must be positive");
        if (ph.envelope_for(env.metric) != nullptr) bad_spec(ph.name + ": duplicate envelope");
        ph.envelopes.push_back(env);
      }
      if (auto it = pj.find("tendency"); it != pj.end() && !it->is_null()) {
        ph.tendency = stick_op_from_json(*it);
        if (!ph.tendency) bad_spec(ph.name + ": malformed tendency");
      }
      ph.control = targets_from_json(pj.value("control", Json()));
      if (spec.phase_index(ph.name)) bad_spec("duplicate phase " + ph.name);
      spec.phases.push_back(std::move(ph));
    }
    spec.completion = condition_from_json(j.value("completion", Json()), "completion");
    spec.metrics_phase = j.value("metrics_phase", spec.phases.front().name);
    spec.timing_start_phase = j.value("timing_start_phase", spec.phases.front().name);
    if (!spec.phase_index(spec.metrics_phase)) bad_spec("metrics_phase names no phase");
    if (!spec.phase_index(spec.timing_start_phase)) bad_spec("timing_start_phase names no phase");
    return spec;
  } catch (const Json::exception& e) {
    bad_spec(e.what());
  }
}

Json task_spec_to_json(const TaskSpec& spec) {
  Json j = Json::object();
  j["task_id"] = spec.task_id;
  j["display_name"] = spec.display_name;
  j["metrics_phase"] = spec.metrics_phase;
  j["timing_start_phase"] = spec.timing_start_phase;
  Json phases = Json::array();
  for (const auto& ph : spec.phases) {
    Json pj = Json::object();
    pj["name"] = ph.name;
    pj["entry"] = condition_to_json(ph.entry);
    Json envs = Json::array();
    for (const auto& e : ph.envelopes) {
      envs.push_back({{"metric", metric_name(e.metric)},
                      {"target", e.target},
                      {"tolerance", e.tolerance},
                      {"weight", e.weight}});
    }
    pj["envelopes"] = envs;
    pj["tendency"] = ph.tendency ? stick_op_to_json(*ph.tendency) : Json();
    pj["control"] = targets_to_json(ph.control);
    phases.push_back(pj);
  }
  j["phases"] = phases;
  j["completion"] = condition_to_json(spec.completion);
  return j;
}

TaskSpec load_task_spec(std::string_view task_id) {
  if (std::find(kTaskIds.begin(), kTaskIds.end(), task_id) == kTaskIds.end())
    throw Error(Errc::UnknownTask, std::string(task_id));
  auto text = load_resource("tasks/" + std::string(task_id) + ".json");
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) bad_spec("built-in spec for " + std::string(task_id) + " is not JSON");
  return task_spec_from_json(j);
}

TaskSpec load_task_spec_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) bad_spec("cannot open " + path.string());
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) bad_spec(path.string() + " is not JSON");
  return task_spec_from_json(j);
}

double MetricDeviation::severity() const noexcept { return weight * std::abs(deviation) / tolerance; }

bool DeviationReport::any_out_of_band() const noexcept {
  return std::any_of(deviations.begin(), deviations.end(),
                     [](const MetricDeviation& d) { return !d.in_band; });
}

const MetricDeviation* DeviationReport::find(Metric m) const noexcept {
  for (const auto& d : deviations) {
    if (d.metric == m) return &d;
  }
  return nullptr;
}

int worst_offender_priority(Metric m) noexcept {
  switch (m) {
    case Metric::altitude_ft: return 0;
    case Metric::bank_deg: return 1;
    case Metric::ias_kt: return 2;
    case Metric::heading_deg: return 3;
    default: return 4 + static_cast<int>(m);
  }
}

double signed_deviation(Metric m, double value, double target) noexcept {
  return is_circular(m) ? circular_difference(value, target) : value - target;
}

DeviationReport evaluate(const FlightState& state, const TaskSpec& spec, std::size_t phase,
                         std::span<const FlightState> history, std::int64_t tick,
                         const EvaluateOptions& options) {
  const PhaseSpec& ph = spec.phases.at(phase);
  DeviationReport report;
  report.tick = tick;
  report.phase_index = phase;
  report.phase_name = ph.name;

  const std::size_t window = std::max<std::size_t>(options.trend_ticks, 2);
  for (const auto& env : ph.envelopes) {
    MetricDeviation d;
    d.metric = env.metric;
    d.value = state.get(env.metric);
    d.target = env.target;
    d.deviation = signed_deviation(env.metric, d.value, env.target);
    d.tolerance = env.tolerance;
    d.weight = env.weight;
    d.in_band = std::abs(d.deviation) <= env.tolerance;

    // Trend: strictly growing |deviation| across the last `window` samples.
    if (history.size() + 1 >= window) {
      bool growing = true;
      double later = std::abs(d.deviation);
      for (std::size_t k = 1; k < window && growing; ++k) {
        const FlightState& earlier_state = history[history.size() - k];
        double earlier =
            std::abs(signed_deviation(env.metric, earlier_state.get(env.metric), env.target));
        growing = earlier < later;
        later = earlier;
      }
      d.trend = growing;
    }
    report.deviations.push_back(d);
  }

  const MetricDeviation* worst = nullptr;
  for (const auto& d : report.deviations) {
    if (d.in_band) continue;
    if (worst == nullptr || d.severity() > worst->severity() ||
        (d.severity() == worst->severity() &&
         worst_offender_priority(d.metric) < worst_offender_priority(worst->metric))) {
      worst = &d;
    }
  }
  if (worst != nullptr) report.worst = worst->metric;
  return report;
}

bool condition_holds(const Condition& c, const FlightState& state, const PhaseProgress& progress) {
  for (const auto& p : c) {
    double v = condition_value(p.key, state, progress);
    bool ok = false;
    switch (p.op) {
      case Predicate::Op::ge: ok = v >= p.value; break;
      case Predicate::Op::le: ok = v <= p.value; break;
      case Predicate::Op::abs_ge: ok = std::abs(v) >= p.value; break;
      case Predicate::Op::abs_le: ok = std::abs(v) <= p.value; break;
    }
    if (!ok) return false;
  }
  return true;
}

PhaseTransition advance_phase(const FlightState& state, const TaskSpec& spec,
                              const PhaseProgress& progress) {
  PhaseTransition tr;
  if (progress.complete) return tr;
  const std::size_t next = progress.phase + 1;
  if (next < spec.phases.size()) {
    if (condition_holds(spec.phases[next].entry, state, progress)) {
      tr.kind = PhaseTransition::Kind::advance;
      tr.event = PhaseEvent{progress.phase, next, spec.phases[next].name, spec.phases[next].tendency};
    }
    return tr;
  }
  if (!spec.completion.empty() && condition_holds(spec.completion, state, progress)) {
    tr.kind = PhaseTransition::Kind::complete;
  }
  return tr;
}

StandardsTracker::StandardsTracker(TaskSpec spec, std::size_t history_window,
                                   EvaluateOptions options)
    : spec_(std::move(spec)), history_window_(history_window), options_(options) {}

DeviationReport StandardsTracker::step(std::int64_t tick, const FlightState& state) {
  if (!started_) {
    started_ = true;
    progress_.start_t = state.t;
    progress_.phase_entry_t = state.t;
    progress_.phase_entry_ticks.assign(spec_.phases.size(), -1);
    progress_.phase_entry_ticks[0] = tick;
  }
  if (progress_.last_heading) {
    progress_.turn_progress_deg += std::abs(circular_difference(state.heading_deg, *progress_.last_heading));
  }
  progress_.last_heading = state.heading_deg;

  PhaseTransition tr = advance_phase(state, spec_, progress_);
  if (tr.kind == PhaseTransition::Kind::advance) {
    progress_.phase = tr.event->to_phase;
    progress_.phase_entry_t = state.t;
    progress_.phase_entry_ticks[progress_.phase] = tick;
  } else if (tr.kind == PhaseTransition::Kind::complete) {
    progress_.complete = true;
    progress_.complete_tick = tick;
  }

  std::vector<FlightState> hist(history_.begin(), history_.end());
  DeviationReport report = evaluate(state, spec_, progress_.phase, hist, tick, options_);
  report.phase_event = tr.event;
  report.task_complete = progress_.complete;

  history_.push_back(state);
  while (history_.size() > history_window_) history_.pop_front();
  return report;
}

Json report_to_json(const DeviationReport& r) {
  Json j = Json::object();
  j["tick"] = r.tick;
  j["phase_index"] = r.phase_index;
  j["phase"] = r.phase_name;
  Json devs = Json::array();
  for (const auto& d : r.deviations) {
    devs.push_back({{"metric", metric_name(d.metric)},
                    {"value", d.value},
                    {"target", d.target},
                    {"deviation", d.deviation},
                    {"tolerance", d.tolerance},
                    {"weight", d.weight},
                    {"in_band", d.in_band},
                    {"trend", d.trend}});
  }
  j["deviations"] = devs;
  j["worst"] = r.worst ? Json(metric_name(*r.worst)) : Json();
  if (r.phase_event) {
    j["phase_event"] = {{"from_phase", r.phase_event->from_phase},
                        {"to_phase", r.phase_event->to_phase},
                        {"phase", r.phase_event->phase_name},
                        {"tendency", r.phase_event->tendency ? stick_op_to_json(*r.phase_event->tendency)
                                                             : Json()}};
  } else {
    j["phase_event"] = nullptr;
  }
  j["task_complete"] = r.task_complete;
  return j;
}

DeviationReport report_from_json(const Json& j) {
  DeviationReport r;
  r.tick = j.at("tick").get<std::int64_t>();
  r.phase_index = j.at("phase_index").get<std::size_t>();
  r.phase_name = j.at("phase").get<std::string>();
  for (const auto& dj : j.at("deviations")) {
    MetricDeviation d;
    auto m = metric_from_name(dj.at("metric").get<std::string>());
    if (!m) throw Error(Errc::CorruptLog, "unknown metric in report");
    d.metric = *m;
    d.value = dj.at("value").get<double>();
    d.target = dj.at("target").get<double>();
    d.deviation = dj.at("deviation").get<double>();
    d.tolerance = dj.at("tolerance").get<double>();
    d.weight = dj.value("weight", 1.0);
    d.in_band = dj.at("in_band").get<bool>();
    d.trend = dj.value("trend", false);
    r.deviations.push_back(d);
  }
  if (const auto& w = j.at("worst"); !w.is_null()) r.worst = metric_from_name(w.get<std::string>());
  if (auto it = j.find("phase_event"); it != j.end() && !it->is_null()) {
    PhaseEvent ev;
    ev.from_phase = it->at("from_phase").get<std::size_t>();
    ev.to_phase = it->at("to_phase").get<std::size_t>();
    ev.phase_name = it->at("phase").get<std::string>();
    ev.tendency = stick_op_from_json(it->value("tendency", Json()));
    r.phase_event = ev;
  }
  r.task_complete = j.value("task_complete", false);
  return r;
}

}  // namespace aerocue
