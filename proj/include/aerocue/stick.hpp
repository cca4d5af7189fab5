#pragma once

#include <optional>
#include <string_view>

#include <json.hpp>

namespace aerocue {

enum class StickAxis { x, y };
enum class StickDirection { plus, minus };
enum class MagnitudeClass { light, firm };

// A single directional stick cue. x+ is roll right, y+ is pull.
struct StickOp {
  StickAxis axis = StickAxis::x;
  StickDirection direction = StickDirection::plus;
  MagnitudeClass magnitude = MagnitudeClass::light;

  int sign() const noexcept { return direction == StickDirection::plus ? 1 : -1; }
  bool operator==(const StickOp&) const = default;
};

std::string_view to_string(StickAxis a) noexcept;
std::string_view to_string(StickDirection d) noexcept;
std::string_view to_string(MagnitudeClass m) noexcept;
std::optional<StickAxis> stick_axis_from(std::string_view s) noexcept;
std::optional<StickDirection> stick_direction_from(std::string_view s) noexcept;
std::optional<MagnitudeClass> magnitude_from(std::string_view s) noexcept;

nlohmann::json stick_op_to_json(const StickOp& op);
// Returns nullopt for null or any malformed object.
std::optional<StickOp> stick_op_from_json(const nlohmann::json& j);

}  // namespace aerocue
