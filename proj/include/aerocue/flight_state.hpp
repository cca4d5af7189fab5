#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace aerocue {

using Json = nlohmann::json;

// The ten telemetry metrics, grouped as position / attitude / speed / dynamics.
enum class Metric : std::uint8_t {
  altitude_ft,
  pitch_deg,
  bank_deg,
  heading_deg,
  ias_kt,
  gs_kt,
  vs_fpm,
  accel_lon_g,
  accel_lat_g,
  accel_vert_g,
};

inline constexpr std::array<Metric, 10> kAllMetrics = {
    Metric::altitude_ft, Metric::pitch_deg,   Metric::bank_deg,    Metric::heading_deg,
    Metric::ias_kt,      Metric::gs_kt,       Metric::vs_fpm,      Metric::accel_lon_g,
    Metric::accel_lat_g, Metric::accel_vert_g,
};

std::string_view metric_name(Metric m) noexcept;
std::optional<Metric> metric_from_name(std::string_view name) noexcept;
// Heading is compared on the circle; everything else on the line.
constexpr bool is_circular(Metric m) noexcept { return m == Metric::heading_deg; }

// Wrap into [0, 360).
double wrap_heading(double deg) noexcept;
// Wrap into [-180, 180).
double wrap_signed(double deg) noexcept;
// Shortest signed arc from `target` to `value`, in (-180, 180].
double circular_difference(double value, double target) noexcept;

// One 1 Hz snapshot. Units: feet, degrees, knots, feet/min, g.
// Positive bank is right wing down.
struct FlightState {
  double t = 0.0;
  double altitude_ft = 0.0;
  double pitch_deg = 0.0;
  double bank_deg = 0.0;
  double heading_deg = 0.0;
  double ias_kt = 0.0;
  double gs_kt = 0.0;
  double vs_fpm = 0.0;
  double accel_lon_g = 0.0;
  double accel_lat_g = 0.0;
  double accel_vert_g = 1.0;

  double get(Metric m) const noexcept;
  void set(Metric m, double v) noexcept;

  bool operator==(const FlightState&) const = default;
};

// Wraps angles, clamps speeds at zero. Throws NonFiniteValue on NaN/Inf.
FlightState normalize(const FlightState& raw);
// Builds a state from a name→value map holding all ten metric keys.
FlightState normalize_state(const std::map<std::string, double>& raw);

struct ControlInput {
  double stick_x = 0.0;   // +: roll right
  double stick_y = 0.0;   // +: pull / pitch up
  double throttle = 0.0;  // [0, 1]

  ControlInput clamped() const noexcept;
  bool operator==(const ControlInput&) const = default;
};

enum class TelemetrySource : std::uint8_t { sim, external };

struct TelemetryRecord {
  std::int64_t tick = 0;
  FlightState state;
  TelemetrySource source = TelemetrySource::sim;

  bool operator==(const TelemetryRecord&) const = default;
};

// One JSON object per line: `tick` plus the ten metric keys. Unknown keys are
// ignored. The parsed state's `t` equals the tick.
TelemetryRecord parse_telemetry_line(std::string_view text);
std::string serialize_telemetry_line(const TelemetryRecord& record);

// Stateful reader enforcing strictly increasing ticks within a session.
class TelemetryReader {
 public:
  TelemetryRecord read(std::string_view line);
  std::optional<std::int64_t> last_tick() const noexcept { return last_tick_; }

 private:
  std::optional<std::int64_t> last_tick_;
};

Json state_to_json(const FlightState& s);
FlightState state_from_json(const Json& j);
Json control_to_json(const ControlInput& c);
ControlInput control_from_json(const Json& j);

}  // namespace aerocue
