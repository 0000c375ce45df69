#include "urbanfuture/geom.hpp"

namespace urbanfuture {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::PointBehindCamera: return "point-behind-camera";
    case ErrorKind::PointAtInfinity: return "point-at-infinity";
    case ErrorKind::DegenerateHomography: return "degenerate-homography";
    case ErrorKind::InsufficientCorrespondences: return "insufficient-correspondences";
    case ErrorKind::DegenerateConfiguration: return "degenerate-configuration";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::HorizonExceedsTrajectory: return "horizon-exceeds-trajectory";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::MalformedMesh: return "malformed-mesh";
    case ErrorKind::MissingKeypoint: return "missing-keypoint";
    case ErrorKind::EmptyMesh: return "empty-mesh";
    case ErrorKind::FullyBehindCamera: return "fully-behind-camera";
    case ErrorKind::NoValidFace: return "no-valid-face";
    case ErrorKind::EmptyInput: return "empty-input";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::NonPsdCovariance: return "non-psd-covariance";
    case ErrorKind::InvalidDistribution: return "invalid-distribution";
    case ErrorKind::MissingHorizon: return "missing-horizon";
    case ErrorKind::MissingFile: return "missing-file";
    case ErrorKind::ParseError: return "parse-error";
    case ErrorKind::CrossReference: return "cross-reference-error";
    case ErrorKind::Io: return "io-error";
    case ErrorKind::NotFound: return "not-found";
  }
  return "unknown";
}

}  // namespace urbanfuture
