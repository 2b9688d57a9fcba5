#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace mhe {

enum class ErrorKind {
  ZeroNormNeuron,
  GeodesicWithBeta,
  HalfSpaceOnOutput,
  BatchTooSmall,
  LabelOutOfRange,
  NonFiniteEnergy,
  InvalidRegime,
  DimensionMismatch,
  ConfigParse,
  Io,
  InvalidArgument,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ZeroNormNeuron: return "ZeroNormNeuron";
    case ErrorKind::GeodesicWithBeta: return "GeodesicWithBeta";
    case ErrorKind::HalfSpaceOnOutput: return "HalfSpaceOnOutput";
    case ErrorKind::BatchTooSmall: return "BatchTooSmall";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::NonFiniteEnergy: return "NonFiniteEnergy";
    case ErrorKind::InvalidRegime: return "InvalidRegime";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ConfigParse: return "ConfigParse";
    case ErrorKind::Io: return "Io";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Library-wide exception. `index()` identifies the offending neuron,
/// label, or row where that is meaningful.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  Error(ErrorKind kind, const std::string& message, std::ptrdiff_t index)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message +
                           " (index " + std::to_string(index) + ")"),
        kind_(kind),
        index_(index) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::ptrdiff_t> index() const noexcept { return index_; }

 private:
  ErrorKind kind_;
  std::optional<std::ptrdiff_t> index_;
};

}  // namespace mhe
