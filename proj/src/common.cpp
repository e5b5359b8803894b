#include "ruka/common.hpp"

#include <cstdio>

namespace ruka {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::LimitViolation: return "limit-violation";
    case ErrorCode::DegenerateKeypoint: return "degenerate-keypoint";
    case ErrorCode::ActuationLimit: return "actuation-limit";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::TrainingDivergence: return "training-divergence";
    case ErrorCode::SchemaVersion: return "schema-version";
    case ErrorCode::TruncatedRecord: return "truncated-record";
    case ErrorCode::ChecksumMismatch: return "checksum-mismatch";
    case ErrorCode::RepresentationMismatch: return "representation-mismatch";
    case ErrorCode::CalibrationFailure: return "calibration-failure";
    case ErrorCode::Uncalibrated: return "uncalibrated";
    case ErrorCode::DigestMissing: return "digest-missing";
    case ErrorCode::DigestMismatch: return "digest-mismatch";
    case ErrorCode::TimestampDisorder: return "timestamp-disorder";
    case ErrorCode::MalformedFrame: return "malformed-frame";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

std::string_view finger_name(Finger f) {
  switch (f) {
    case Finger::Thumb: return "thumb";
    case Finger::Index: return "index";
    case Finger::Middle: return "middle";
    case Finger::Ring: return "ring";
    case Finger::Pinky: return "pinky";
  }
  return "?";
}

Finger finger_from_name(std::string_view name) {
  for (Finger f : kAllFingers) {
    if (finger_name(f) == name) return f;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown finger '" + std::string(name) + "'");
}

std::string Fnv1a::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_));
  return buf;
}

std::string digest_of(std::string_view bytes) {
  Fnv1a h;
  h.update(bytes);
  return h.hex();
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
  // splitmix64 over the combined state
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace ruka
