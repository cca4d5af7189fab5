#include "aerocue/stick.hpp"

namespace aerocue {

std::string_view to_string(StickAxis a) noexcept { return a == StickAxis::x ? "x" : "y"; }
std::string_view to_string(StickDirection d) noexcept {
  return d == StickDirection::plus ? "+" : "-";
}
std::string_view to_string(MagnitudeClass m) noexcept {
  return m == MagnitudeClass::light ? "light" : "firm";
}

std::optional<StickAxis> stick_axis_from(std::string_view s) noexcept {
  if (s == "x") return StickAxis::x;
  if (s == "y") return StickAxis::y;
  return std::nullopt;
}

std::optional<StickDirection> stick_direction_from(std::string_view s) noexcept {
  if (s == "+") return StickDirection::plus;
  if (s == "-") return StickDirection::minus;
  return std::nullopt;
}

std::optional<MagnitudeClass> magnitude_from(std::string_view s) noexcept {
  if (s == "light") return MagnitudeClass::light;
  if (s == "firm") return MagnitudeClass::firm;
  return std::nullopt;
}

nlohmann::json stick_op_to_json(const StickOp& op) {
  return {{"axis", to_string(op.axis)},
          {"direction", to_string(op.direction)},
          {"magnitude", to_string(op.magnitude)}};
}

std::optional<StickOp> stick_op_from_json(const nlohmann::json& j) {
  if (!j.is_object()) return std::nullopt;
  auto text = [&](const char* key) -> std::string {
    auto it = j.find(key);
    return (it != j.end() && it->is_string()) ? it->get<std::string>() : std::string{};
  };
  auto axis = stick_axis_from(text("axis"));
  auto dir = stick_direction_from(text("direction"));
  auto mag = magnitude_from(text("magnitude"));
  if (!axis || !dir || !mag) return std::nullopt;
  return StickOp{*axis, *dir, *mag};
}

}  // namespace aerocue
