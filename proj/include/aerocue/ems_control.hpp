#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aerocue/flight_state.hpp"
#include "aerocue/stick.hpp"

namespace aerocue {

// Forearm muscle groups driving the four stick directions. The numeric values
// are the wire encoding.
enum class Channel : std::uint8_t { fwd = 0, back = 1, left = 2, right = 3 };
inline constexpr std::array<Channel, 4> kAllChannels = {Channel::fwd, Channel::back, Channel::left,
                                                        Channel::right};
std::string_view to_string(Channel c) noexcept;
std::optional<Channel> channel_from(std::string_view s) noexcept;

// 1 constant, 2 rising, 3 rise-and-fall, 4 falling.
enum class EmsMode : std::uint8_t { constant = 1, rising = 2, swell = 3, falling = 4 };
int mode_number(EmsMode m) noexcept;
std::optional<EmsMode> mode_from_number(int n) noexcept;

enum class Trigger { pre_start, correction };
std::string_view to_string(Trigger t) noexcept;
std::optional<Trigger> trigger_from(std::string_view s) noexcept;

struct ChannelCalibration {
  double perception_threshold_ma = 0.0;
  double motion_threshold_ma = 0.0;
  double max_comfort_ma = 0.0;
};

struct CalibrationProfile {
  std::string subject_id;
  std::array<std::optional<ChannelCalibration>, 4> channels;
  double ceiling_ma = 0.0;

  // perception < motion <= max_comfort <= ceiling, all positive. Throws InvalidProfile.
  void validate() const;
  // Throws UncalibratedChannel.
  const ChannelCalibration& channel(Channel c) const;

  static CalibrationProfile default_profile();
};

Json profile_to_json(const CalibrationProfile& p);
CalibrationProfile profile_from_json(const Json& j);

// Shape constants; the defaults are the documented closed forms.
struct EnvelopeShape {
  double constant_level = 0.8;
  double floor = 0.4;  // start of mode 2, ends of mode 3
  double span = 0.6;   // rise (modes 2, 3) or fall (mode 4)
  double light_scale = 0.7;
  double firm_scale = 1.0;
  double sample_rate_hz = 100.0;
  int default_duration_ms = 800;
};

// Amplitude is a fraction of the channel drive range between the motion
// threshold and the comfort maximum.
struct WaveformEnvelope {
  EmsMode mode = EmsMode::rising;
  int duration_ms = 800;
  double sample_rate_hz = 100.0;
  std::vector<double> samples;  // at t_i = min(i / rate, T)

  double peak() const noexcept;
  double time_of(std::size_t i) const noexcept;  // ms
};

// Unscaled shape value at t in [0, T], for mode m.
double envelope_value(EmsMode m, double t_ms, double duration_ms, const EnvelopeShape& shape = {});

// Throws InvalidDuration (outside [200, 3000] ms) or UncalibratedChannel.
WaveformEnvelope synthesize(EmsMode mode, MagnitudeClass magnitude, int duration_ms,
                            const CalibrationProfile& profile, Channel channel,
                            const EnvelopeShape& shape = {});

// Shape invariant of the envelope's mode, plus range [0, 1].
bool envelope_shape_holds(const WaveformEnvelope& env);

// pre_start -> 3, correction -> 2.
EmsMode select_mode(Trigger trigger) noexcept;

// x+ right, x- left, y+ back (pull), y- fwd (push).
Channel map_direction(const StickOp& op) noexcept;
StickOp stick_of_channel(Channel c, MagnitudeClass m = MagnitudeClass::firm) noexcept;

struct EmsCommand {
  Channel channel = Channel::fwd;
  WaveformEnvelope envelope;
  std::int64_t start_tick = 0;
  double start_offset_ms = 0.0;  // within the start tick
  Trigger purpose = Trigger::correction;
  // Multiplies the envelope when mapping to current. 1.0 unless misconfigured.
  double intensity_scale = 1.0;

  double start_ms() const noexcept { return start_tick * 1000.0 + start_offset_ms; }
  double end_ms() const noexcept { return start_ms() + envelope.duration_ms; }
  // Peak drive fraction after intensity scaling (may exceed 1 if misconfigured).
  double drive_fraction() const noexcept { return envelope.peak() * intensity_scale; }
  // Peak current in mA for this channel.
  double peak_ma(const CalibrationProfile& profile) const;
};

Json command_to_json(const EmsCommand& c);
EmsCommand command_from_json(const Json& j);

struct SafetyLimits {
  double window_ms = 10000.0;
  double max_duty = 0.5;
  double min_gap_ms = 250.0;
  std::size_t max_concurrent_channels = 2;
};

struct GateOutcome {
  enum class Kind { pass, clamped, rejected };
  Kind kind = Kind::pass;
  EmsCommand command;  // possibly clamped; meaningless when rejected
  std::string reason;  // "ceiling", "duty_cycle", "channel_gap", "concurrency"
};

// Owns the per-channel history of accepted commands. Single writer.
class SafetyGate {
 public:
  explicit SafetyGate(SafetyLimits limits = {}) : limits_(limits) {}

  // Enforces: peak <= max_comfort (clamp), ceiling (reject), per-channel gap,
  // per-channel duty cycle over every rolling window, concurrent channels.
  // Accepted commands enter the history.
  GateOutcome check(const EmsCommand& command, const CalibrationProfile& profile);

  struct Span {
    Channel channel;
    double start_ms;
    double end_ms;
  };
  const std::vector<Span>& history() const noexcept { return history_; }
  const SafetyLimits& limits() const noexcept { return limits_; }

 private:
  SafetyLimits limits_;
  std::vector<Span> history_;
};

// Maximum on-time fraction of `channel` over any window of `window_ms`.
double max_rolling_duty(std::span<const SafetyGate::Span> spans, Channel channel, double window_ms);

inline constexpr std::uint8_t kFrameSync = 0xA5;
inline constexpr std::uint8_t kAckByte = 0x5A;
inline constexpr std::size_t kFrameSize = 8;
using DeviceFrame = std::array<std::uint8_t, kFrameSize>;

std::uint8_t crc8(std::span<const std::uint8_t> bytes) noexcept;

struct FrameSummary {
  Channel channel = Channel::fwd;
  EmsMode mode = EmsMode::rising;
  std::uint8_t peak = 0;
  std::uint16_t duration_ms = 0;
  bool pre_start = false;

  bool operator==(const FrameSummary&) const = default;
};

// Peak byte = round(255 * drive fraction). Throws BadField if the command has
// not been gated (drive fraction > 1) or the duration does not fit 16 bits.
DeviceFrame encode_frame(const EmsCommand& command, const CalibrationProfile& profile);
// Throws TruncatedFrame, BadSync, BadChecksum, BadField, in that order of checks.
FrameSummary decode_frame(std::span<const std::uint8_t> bytes);
// Current the device will drive for a decoded frame.
double frame_peak_ma(const FrameSummary& f, const CalibrationProfile& profile);

// Stick delta the synthetic trainee feels; |delta| <= 0.35.
inline constexpr double kMaxNudge = 0.35;
ControlInput nudge_of(const EmsCommand& command);

// Simulated stimulator: validates a frame and produces the 2-byte ack
// [0x5A, crc8(frame)]. Returns nullopt for an invalid frame.
std::optional<std::array<std::uint8_t, 2>> device_ack(std::span<const std::uint8_t> frame);

}  // namespace aerocue
