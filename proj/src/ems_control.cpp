#include "aerocue/ems_control.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "aerocue/error.hpp"

namespace aerocue {

namespace {

constexpr double kShapeEps = 1e-12;

}  // namespace

std::string_view to_string(Channel c) noexcept {
  switch (c) {
    case Channel::fwd: return "fwd";
    case Channel::back: return "back";
    case Channel::left: return "left";
    case Channel::right: return "right";
  }
  return "fwd";
}

std::optional<Channel> channel_from(std::string_view s) noexcept {
  for (Channel c : kAllChannels) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

int mode_number(EmsMode m) noexcept { return static_cast<int>(m); }

std::optional<EmsMode> mode_from_number(int n) noexcept {
  if (n < 1 || n > 4) return std::nullopt;
  return static_cast<EmsMode>(n);
}

std::string_view to_string(Trigger t) noexcept {
  return t == Trigger::pre_start ? "pre_start" : "correction";
}

std::optional<Trigger> trigger_from(std::string_view s) noexcept {
  if (s == "pre_start") return Trigger::pre_start;
  if (s == "correction") return Trigger::correction;
  return std::nullopt;
}

void CalibrationProfile::validate() const {
  if (!(ceiling_ma > 0.0)) throw Error(Errc::InvalidProfile, "ceiling must be positive");
  for (Channel c : kAllChannels) {
    const auto& cal = channels[static_cast<std::size_t>(c)];
    if (!cal) continue;
    const bool ok = cal->perception_threshold_ma > 0.0 &&
                    cal->perception_threshold_ma < cal->motion_threshold_ma &&
                    cal->motion_threshold_ma <= cal->max_comfort_ma &&
                    cal->max_comfort_ma <= ceiling_ma;
    if (!ok) throw Error(Errc::InvalidProfile, "thresholds out of order on " + std::string(to_string(c)));
  }
}

const ChannelCalibration& CalibrationProfile::channel(Channel c) const {
  const auto& cal = channels[static_cast<std::size_t>(c)];
  if (!cal) throw Error(Errc::UncalibratedChannel, std::string(to_string(c)));
  return *cal;
}

CalibrationProfile CalibrationProfile::default_profile() {
  CalibrationProfile p;
  p.subject_id = "default";
  p.ceiling_ma = 25.0;
  for (auto& ch : p.channels) ch = ChannelCalibration{6.0, 10.0, 18.0};
  return p;
}

Json profile_to_json(const CalibrationProfile& p) {
  Json channels = Json::object();
  for (Channel c : kAllChannels) {
    const auto& cal = p.channels[static_cast<std::size_t>(c)];
    if (!cal) continue;
    channels[std::string(to_string(c))] = {{"perception_threshold_ma", cal->perception_threshold_ma},
                                           {"motion_threshold_ma", cal->motion_threshold_ma},
                                           {"max_comfort_ma", cal->max_comfort_ma}};
  }
  return {{"subject_id", p.subject_id}, {"ceiling_ma", p.ceiling_ma}, {"channels", channels}};
}

CalibrationProfile profile_from_json(const Json& j) {
  try {
    CalibrationProfile p;
    p.subject_id = j.value("subject_id", std::string());
    p.ceiling_ma = j.at("ceiling_ma").get<double>();
    for (const auto& [name, cj] : j.at("channels").items()) {
      auto c = channel_from(name);
      if (!c) throw Error(Errc::InvalidProfile, "unknown channel " + name);
      p.channels[static_cast<std::size_t>(*c)] =
          ChannelCalibration{cj.at("perception_threshold_ma").get<double>(),
                             cj.at("motion_threshold_ma").get<double>(),
                             cj.at("max_comfort_ma").get<double>()};
    }
    p.validate();
    return p;
  } catch (const Json::exception& e) {
    throw Error(Errc::InvalidProfile, e.what());
  }
}

double WaveformEnvelope::peak() const noexcept {
  return samples.empty() ? 0.0 : *std::max_element(samples.begin(), samples.end());
}

double WaveformEnvelope::time_of(std::size_t i) const noexcept {
  return std::min(static_cast<double>(i) * 1000.0 / sample_rate_hz, static_cast<double>(duration_ms));
}

double envelope_value(EmsMode m, double t_ms, double duration_ms, const EnvelopeShape& shape) {
  const double x = std::clamp(t_ms / duration_ms, 0.0, 1.0);
  switch (m) {
    case EmsMode::constant: return shape.constant_level;
    case EmsMode::rising: return shape.floor + shape.span * x;
    case EmsMode::swell: return shape.floor + shape.span * std::sin(std::numbers::pi * x);
    case EmsMode::falling: return shape.floor + shape.span - shape.span * x;
  }
  return 0.0;
}

WaveformEnvelope synthesize(EmsMode mode, MagnitudeClass magnitude, int duration_ms,
                            const CalibrationProfile& profile, Channel channel,
                            const EnvelopeShape& shape) {
  if (duration_ms < 200 || duration_ms > 3000)
    throw Error(Errc::InvalidDuration, std::to_string(duration_ms) + " ms");
  profile.validate();
  (void)profile.channel(channel);

  WaveformEnvelope env;
  env.mode = mode;
  env.duration_ms = duration_ms;
  env.sample_rate_hz = shape.sample_rate_hz;
  const double scale = magnitude == MagnitudeClass::light ? shape.light_scale : shape.firm_scale;
  const auto count =
      static_cast<std::size_t>(std::ceil(duration_ms * shape.sample_rate_hz / 1000.0 - 1e-9)) + 1;
  env.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double v = scale * envelope_value(mode, env.time_of(i), duration_ms, shape);
    env.samples.push_back(std::clamp(v, 0.0, 1.0));
  }
  return env;
}

bool envelope_shape_holds(const WaveformEnvelope& env) {
  const auto& s = env.samples;
  if (s.size() < 3) return false;
  if (std::any_of(s.begin(), s.end(), [](double v) { return !(v >= 0.0 && v <= 1.0); })) return false;
  switch (env.mode) {
    case EmsMode::constant:
      return std::all_of(s.begin(), s.end(), [&](double v) { return std::abs(v - s.front()) <= kShapeEps; });
    case EmsMode::rising:
      for (std::size_t i = 1; i < s.size(); ++i) {
        if (s[i] + kShapeEps < s[i - 1]) return false;
      }
      return true;
    case EmsMode::falling:
      for (std::size_t i = 1; i < s.size(); ++i) {
        if (s[i] > s[i - 1] + kShapeEps) return false;
      }
      return true;
    case EmsMode::swell: {
      const auto peak = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
      if (peak == 0 || peak + 1 == s.size()) return false;
      for (std::size_t i = 1; i <= peak; ++i) {
        if (s[i] + kShapeEps < s[i - 1]) return false;
      }
      for (std::size_t i = peak + 1; i < s.size(); ++i) {
        if (s[i] > s[i - 1] + kShapeEps) return false;
      }
      // must actually rise and fall
      return s[peak] > s.front() + kShapeEps && s[peak] > s.back() + kShapeEps;
    }
  }
  return false;
}

EmsMode select_mode(Trigger trigger) noexcept {
  return trigger == Trigger::pre_start ? EmsMode::swell : EmsMode::rising;
}

Channel map_direction(const StickOp& op) noexcept {
  if (op.axis == StickAxis::x) return op.direction == StickDirection::plus ? Channel::right : Channel::left;
  return op.direction == StickDirection::plus ? Channel::back : Channel::fwd;
}

StickOp stick_of_channel(Channel c, MagnitudeClass m) noexcept {
  switch (c) {
    case Channel::right: return {StickAxis::x, StickDirection::plus, m};
    case Channel::left: return {StickAxis::x, StickDirection::minus, m};
    case Channel::back: return {StickAxis::y, StickDirection::plus, m};
    case Channel::fwd: return {StickAxis::y, StickDirection::minus, m};
  }
  return {};
}

double EmsCommand::peak_ma(const CalibrationProfile& profile) const {
  const auto& cal = profile.channel(channel);
  return cal.motion_threshold_ma + drive_fraction() * (cal.max_comfort_ma - cal.motion_threshold_ma);
}

Json command_to_json(const EmsCommand& c) {
  return {{"channel", to_string(c.channel)},
          {"mode", mode_number(c.envelope.mode)},
          {"duration_ms", c.envelope.duration_ms},
          {"sample_rate_hz", c.envelope.sample_rate_hz},
          {"samples", c.envelope.samples},
          {"start_tick", c.start_tick},
          {"start_offset_ms", c.start_offset_ms},
          {"purpose", to_string(c.purpose)},
          {"intensity_scale", c.intensity_scale}};
}

EmsCommand command_from_json(const Json& j) {
  EmsCommand c;
  auto ch = channel_from(j.at("channel").get<std::string>());
  auto mode = mode_from_number(j.at("mode").get<int>());
  auto purpose = trigger_from(j.at("purpose").get<std::string>());
  if (!ch || !mode || !purpose) throw Error(Errc::BadField, "malformed EMS command");
  c.channel = *ch;
  c.envelope.mode = *mode;
  c.envelope.duration_ms = j.at("duration_ms").get<int>();
  c.envelope.sample_rate_hz = j.value("sample_rate_hz", 100.0);
  c.envelope.samples = j.at("samples").get<std::vector<double>>();
  c.start_tick = j.at("start_tick").get<std::int64_t>();
  c.start_offset_ms = j.value("start_offset_ms", 0.0);
  c.purpose = *purpose;
  c.intensity_scale = j.value("intensity_scale", 1.0);
  return c;
}

double max_rolling_duty(std::span<const SafetyGate::Span> spans, Channel channel, double window_ms) {
  // On-time inside a sliding window is piecewise linear in the window start,
  // so its maximum is attained with a window edge on some span edge.
  std::vector<double> starts;
  for (const auto& s : spans) {
    if (s.channel != channel) continue;
    starts.push_back(s.start_ms);
    starts.push_back(s.end_ms - window_ms);
  }
  double best = 0.0;
  for (double w : starts) {
    double on = 0.0;
    for (const auto& s : spans) {
      if (s.channel != channel) continue;
      on += std::max(0.0, std::min(s.end_ms, w + window_ms) - std::max(s.start_ms, w));
    }
    best = std::max(best, on);
  }
  return best / window_ms;
}

GateOutcome SafetyGate::check(const EmsCommand& command, const CalibrationProfile& profile) {
  GateOutcome out;
  out.command = command;
  const auto& cal = profile.channel(command.channel);

  const double peak = command.peak_ma(profile);
  if (!(peak <= profile.ceiling_ma)) {
    out.kind = GateOutcome::Kind::rejected;
    out.reason = "ceiling";
    return out;
  }
  if (peak > cal.max_comfort_ma) {
    out.kind = GateOutcome::Kind::clamped;
    out.reason = "max_comfort";
    const double env_peak = command.envelope.peak();
    out.command.intensity_scale = env_peak > 0.0 ? 1.0 / env_peak : 0.0;
  }

  const Span next{command.channel, command.start_ms(), command.end_ms()};
  for (const auto& s : history_) {
    if (s.channel != next.channel) continue;
    if (next.start_ms < s.end_ms + limits_.min_gap_ms && s.start_ms < next.end_ms + limits_.min_gap_ms) {
      out.kind = GateOutcome::Kind::rejected;
      out.reason = "channel_gap";
      return out;
    }
  }

  std::vector<Span> candidate = history_;
  candidate.push_back(next);
  if (max_rolling_duty(candidate, next.channel, limits_.window_ms) > limits_.max_duty + 1e-12) {
    out.kind = GateOutcome::Kind::rejected;
    out.reason = "duty_cycle";
    return out;
  }

  std::size_t concurrent = 1;
  for (Channel c : kAllChannels) {
    if (c == next.channel) continue;
    const bool overlaps = std::any_of(history_.begin(), history_.end(), [&](const Span& s) {
      return s.channel == c && s.start_ms < next.end_ms && next.start_ms < s.end_ms;
    });
    if (overlaps) ++concurrent;
  }
  if (concurrent > limits_.max_concurrent_channels) {
    out.kind = GateOutcome::Kind::rejected;
    out.reason = "concurrency";
    return out;
  }

  const double horizon = next.start_ms - limits_.window_ms - limits_.min_gap_ms;
  std::erase_if(history_, [&](const Span& s) { return s.end_ms < horizon; });
  history_.push_back(next);
  return out;
}

std::uint8_t crc8(std::span<const std::uint8_t> bytes) noexcept {
  std::uint8_t crc = 0x00;
  for (std::uint8_t b : bytes) {
    crc ^= b;
    for (int i = 0; i < 8; ++i) {
      crc = (crc & 0x80) != 0 ? static_cast<std::uint8_t>((crc << 1) ^ 0x07) : static_cast<std::uint8_t>(crc << 1);
    }
  }
  return crc;
}

DeviceFrame encode_frame(const EmsCommand& command, const CalibrationProfile& profile) {
  (void)profile.channel(command.channel);
  const double drive = command.drive_fraction();
  if (!(drive >= 0.0 && drive <= 1.0 + 1e-9))
    throw Error(Errc::BadField, "drive fraction outside [0, 1]; command was not gated");
  if (command.envelope.duration_ms < 0 || command.envelope.duration_ms > 0xFFFF)
    throw Error(Errc::BadField, "duration does not fit 16 bits");

  DeviceFrame f{};
  f[0] = kFrameSync;
  f[1] = static_cast<std::uint8_t>(command.channel);
  f[2] = static_cast<std::uint8_t>(mode_number(command.envelope.mode));
  f[3] = static_cast<std::uint8_t>(std::lround(255.0 * std::min(drive, 1.0)));
  const auto dur = static_cast<std::uint16_t>(command.envelope.duration_ms);
  f[4] = static_cast<std::uint8_t>(dur >> 8);
  f[5] = static_cast<std::uint8_t>(dur & 0xFF);
  f[6] = command.purpose == Trigger::pre_start ? 0x01 : 0x00;
  f[7] = crc8(std::span<const std::uint8_t>(f.data(), 7));
  return f;
}

FrameSummary decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameSize) throw Error(Errc::TruncatedFrame, std::to_string(bytes.size()) + " bytes");
  const auto frame = bytes.first(kFrameSize);
  if (frame[0] != kFrameSync) throw Error(Errc::BadSync, "");
  if (crc8(frame.first(7)) != frame[7]) throw Error(Errc::BadChecksum, "");
  if (frame[1] > 3) throw Error(Errc::BadField, "channel");
  auto mode = mode_from_number(frame[2]);
  if (!mode) throw Error(Errc::BadField, "mode");
  if ((frame[6] & 0xFE) != 0) throw Error(Errc::BadField, "flags");

  FrameSummary s;
  s.channel = static_cast<Channel>(frame[1]);
  s.mode = *mode;
  s.peak = frame[3];
  s.duration_ms = static_cast<std::uint16_t>((frame[4] << 8) | frame[5]);
  s.pre_start = (frame[6] & 0x01) != 0;
  return s;
}

double frame_peak_ma(const FrameSummary& f, const CalibrationProfile& profile) {
  const auto& cal = profile.channel(f.channel);
  return cal.motion_threshold_ma + (f.peak / 255.0) * (cal.max_comfort_ma - cal.motion_threshold_ma);
}

ControlInput nudge_of(const EmsCommand& command) {
  const double magnitude = kMaxNudge * std::clamp(command.drive_fraction(), 0.0, 1.0);
  ControlInput delta;
  switch (command.channel) {
    case Channel::right: delta.stick_x = magnitude; break;
    case Channel::left: delta.stick_x = -magnitude; break;
    case Channel::back: delta.stick_y = magnitude; break;
    case Channel::fwd: delta.stick_y = -magnitude; break;
  }
  return delta;
}

std::optional<std::array<std::uint8_t, 2>> device_ack(std::span<const std::uint8_t> frame) {
  try {
    (void)decode_frame(frame);
  } catch (const Error&) {
    return std::nullopt;
  }
  return std::array<std::uint8_t, 2>{kAckByte, crc8(frame.first(kFrameSize))};
}

}  // namespace aerocue
