#include "aerocue/error.hpp"

namespace aerocue {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MissingMetric: return "MissingMetric";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::TickRegression: return "TickRegression";
    case Errc::NonFiniteState: return "NonFiniteState";
    case Errc::TrimNotFound: return "TrimNotFound";
    case Errc::InvalidScenario: return "InvalidScenario";
    case Errc::UnknownTask: return "UnknownTask";
    case Errc::InvalidSpecFile: return "InvalidSpecFile";
    case Errc::IncompleteTrace: return "IncompleteTrace";
    case Errc::EmptyDocument: return "EmptyDocument";
    case Errc::EmptyIndex: return "EmptyIndex";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ProviderUnavailable: return "ProviderUnavailable";
    case Errc::InvalidIndexFile: return "InvalidIndexFile";
    case Errc::BackendTimeout: return "BackendTimeout";
    case Errc::MalformedResponse: return "MalformedResponse";
    case Errc::InvariantViolation: return "InvariantViolation";
    case Errc::AlignDegraded: return "AlignDegraded";
    case Errc::InvalidDuration: return "InvalidDuration";
    case Errc::UncalibratedChannel: return "UncalibratedChannel";
    case Errc::InvalidProfile: return "InvalidProfile";
    case Errc::BadChecksum: return "BadChecksum";
    case Errc::BadSync: return "BadSync";
    case Errc::TruncatedFrame: return "TruncatedFrame";
    case Errc::BadField: return "BadField";
    case Errc::DeviceUnavailable: return "DeviceUnavailable";
    case Errc::SourceExhausted: return "SourceExhausted";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::CorruptLog: return "CorruptLog";
    case Errc::PortInUse: return "PortInUse";
    case Errc::EmptyLogSet: return "EmptyLogSet";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + (detail.empty() ? "" : ": " + detail)),
      code_(code),
      detail_(detail) {}

}  // namespace aerocue
