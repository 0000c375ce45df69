#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace urbanfuture {

enum class ErrorKind {
  PointBehindCamera,
  PointAtInfinity,
  DegenerateHomography,
  InsufficientCorrespondences,
  DegenerateConfiguration,
  Divergence,
  HorizonExceedsTrajectory,
  InvalidArgument,
  MalformedMesh,
  MissingKeypoint,
  EmptyMesh,
  FullyBehindCamera,
  NoValidFace,
  EmptyInput,
  DimensionMismatch,
  NonPsdCovariance,
  InvalidDistribution,
  MissingHorizon,
  MissingFile,
  ParseError,
  CrossReference,
  Io,
  NotFound,
};

std::string_view to_string(ErrorKind kind);

// All library failures are reported through this exception; kind() lets callers
// and tests distinguish the failure class without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace urbanfuture
