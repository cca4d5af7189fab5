#include "aerocue/flight_state.hpp"

#include <algorithm>
#include <cmath>

#include "aerocue/error.hpp"

namespace aerocue {

namespace {

constexpr std::array<std::string_view, 10> kNames = {
    "altitude_ft", "pitch_deg", "bank_deg",    "heading_deg", "ias_kt",
    "gs_kt",       "vs_fpm",    "accel_lon_g", "accel_lat_g", "accel_vert_g",
};

void require_finite(double v, std::string_view name) {
  if (!std::isfinite(v)) throw Error(Errc::NonFiniteValue, std::string(name));
}

}  // namespace

std::string_view metric_name(Metric m) noexcept { return kNames[static_cast<std::size_t>(m)]; }

std::optional<Metric> metric_from_name(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<Metric>(i);
  }
  return std::nullopt;
}

double wrap_heading(double deg) noexcept {
  double w = std::fmod(deg, 360.0);
  if (w < 0.0) w += 360.0;
  // fmod of a tiny negative can round up to exactly 360
  if (w >= 360.0) w -= 360.0;
  return w;
}

double wrap_signed(double deg) noexcept {
  if (deg >= -180.0 && deg < 180.0) return deg;
  double w = wrap_heading(deg + 180.0) - 180.0;
  if (w >= 180.0) w -= 360.0;
  return w;
}

double circular_difference(double value, double target) noexcept {
  double d = wrap_signed(value - target);
  // (-180, 180]: a half-turn is reported as +180
  if (d == -180.0) d = 180.0;
  return d;
}

double FlightState::get(Metric m) const noexcept {
  switch (m) {
    case Metric::altitude_ft: return altitude_ft;
    case Metric::pitch_deg: return pitch_deg;
    case Metric::bank_deg: return bank_deg;
    case Metric::heading_deg: return heading_deg;
    case Metric::ias_kt: return ias_kt;
    case Metric::gs_kt: return gs_kt;
    case Metric::vs_fpm: return vs_fpm;
    case Metric::accel_lon_g: return accel_lon_g;
    case Metric::accel_lat_g: return accel_lat_g;
    case Metric::accel_vert_g: return accel_vert_g;
  }
  return 0.0;
}

void FlightState::set(Metric m, double v) noexcept {
  switch (m) {
    case Metric::altitude_ft: altitude_ft = v; break;
    case Metric::pitch_deg: pitch_deg = v; break;
    case Metric::bank_deg: bank_deg = v; break;
    case Metric::heading_deg: heading_deg = v; break;
    case Metric::ias_kt: ias_kt = v; break;
    case Metric::gs_kt: gs_kt = v; break;
    case Metric::vs_fpm: vs_fpm = v; break;
    case Metric::accel_lon_g: accel_lon_g = v; break;
    case Metric::accel_lat_g: accel_lat_g = v; break;
    case Metric::accel_vert_g: accel_vert_g = v; break;
  }
}

FlightState normalize(const FlightState& raw) {
  require_finite(raw.t, "t");
  for (Metric m : kAllMetrics) require_finite(raw.get(m), metric_name(m));
  FlightState s = raw;
  s.pitch_deg = wrap_signed(raw.pitch_deg);
  s.bank_deg = wrap_signed(raw.bank_deg);
  s.heading_deg = wrap_heading(raw.heading_deg);
  s.ias_kt = std::max(0.0, raw.ias_kt);
  s.gs_kt = std::max(0.0, raw.gs_kt);
  return s;
}

FlightState normalize_state(const std::map<std::string, double>& raw) {
  FlightState s;
  for (Metric m : kAllMetrics) {
    auto it = raw.find(std::string(metric_name(m)));
    if (it == raw.end()) throw Error(Errc::MissingMetric, std::string(metric_name(m)));
    s.set(m, it->second);
  }
  if (auto it = raw.find("t"); it != raw.end()) s.t = it->second;
  return normalize(s);
}

ControlInput ControlInput::clamped() const noexcept {
  auto fin = [](double v) { return std::isfinite(v) ? v : 0.0; };
  return {std::clamp(fin(stick_x), -1.0, 1.0), std::clamp(fin(stick_y), -1.0, 1.0),
          std::clamp(fin(throttle), 0.0, 1.0)};
}

TelemetryRecord parse_telemetry_line(std::string_view text) {
  Json j = Json::parse(text.begin(), text.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::MalformedLine, "not a JSON object");
  auto tick_it = j.find("tick");
  if (tick_it == j.end()) throw Error(Errc::MissingMetric, "tick");
  if (!tick_it->is_number_integer()) throw Error(Errc::MalformedLine, "tick is not an integer");

  std::map<std::string, double> raw;
  for (Metric m : kAllMetrics) {
    auto it = j.find(std::string(metric_name(m)));
    if (it == j.end()) throw Error(Errc::MissingMetric, std::string(metric_name(m)));
    if (!it->is_number()) {
      // JSON has no NaN/Inf literal; emitters write null for them
      if (it->is_null()) throw Error(Errc::NonFiniteValue, std::string(metric_name(m)));
      throw Error(Errc::MalformedLine, std::string(metric_name(m)) + " is not a number");
    }
    raw.emplace(metric_name(m), it->get<double>());
  }
  TelemetryRecord rec;
  rec.tick = tick_it->get<std::int64_t>();
  raw["t"] = static_cast<double>(rec.tick);
  rec.state = normalize_state(raw);
  rec.source = TelemetrySource::external;
  return rec;
}

std::string serialize_telemetry_line(const TelemetryRecord& record) {
  Json j = Json::object();
  j["tick"] = record.tick;
  for (Metric m : kAllMetrics) j[std::string(metric_name(m))] = record.state.get(m);
  return j.dump();
}

TelemetryRecord TelemetryReader::read(std::string_view line) {
  TelemetryRecord rec = parse_telemetry_line(line);
  if (last_tick_ && rec.tick <= *last_tick_) {
    throw Error(Errc::TickRegression,
                "tick " + std::to_string(rec.tick) + " after " + std::to_string(*last_tick_));
  }
  last_tick_ = rec.tick;
  return rec;
}

Json state_to_json(const FlightState& s) {
  Json j = Json::object();
  j["t"] = s.t;
  for (Metric m : kAllMetrics) j[std::string(metric_name(m))] = s.get(m);
  return j;
}

FlightState state_from_json(const Json& j) {
  FlightState s;
  s.t = j.at("t").get<double>();
  for (Metric m : kAllMetrics) s.set(m, j.at(std::string(metric_name(m))).get<double>());
  return s;
}

Json control_to_json(const ControlInput& c) {
  return Json{{"stick_x", c.stick_x}, {"stick_y", c.stick_y}, {"throttle", c.throttle}};
}

ControlInput control_from_json(const Json& j) {
  ControlInput c;
  c.stick_x = j.value("stick_x", 0.0);
  c.stick_y = j.value("stick_y", 0.0);
  c.throttle = j.value("throttle", 0.0);
  return c;
}

}  // namespace aerocue
