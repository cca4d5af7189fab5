#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aerocue {

// Every failure the engine reports through exceptions carries one of these
// codes. Outcomes that are values (safety gate verdicts, validator results,
// phase transitions) never throw.
enum class Errc {
  // flight_state
  MissingMetric,
  NonFiniteValue,
  MalformedLine,
  TickRegression,
  // flight_sim
  NonFiniteState,
  TrimNotFound,
  InvalidScenario,
  // task_standards
  UnknownTask,
  InvalidSpecFile,
  IncompleteTrace,
  // knowledge_base
  EmptyDocument,
  EmptyIndex,
  DimensionMismatch,
  ProviderUnavailable,
  InvalidIndexFile,
  // guidance_pipeline
  BackendTimeout,
  MalformedResponse,
  InvariantViolation,
  AlignDegraded,
  // ems_control
  InvalidDuration,
  UncalibratedChannel,
  InvalidProfile,
  BadChecksum,
  BadSync,
  TruncatedFrame,
  BadField,
  DeviceUnavailable,
  // session_engine
  SourceExhausted,
  ConfigInvalid,
  CorruptLog,
  PortInUse,
  // eval_harness
  EmptyLogSet,
  // generic
  Io,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail);

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace aerocue
