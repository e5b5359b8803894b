#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ruka {

enum class ErrorCode {
  LimitViolation,
  DegenerateKeypoint,
  ActuationLimit,
  InvalidArgument,
  DimensionMismatch,
  TrainingDivergence,
  SchemaVersion,
  TruncatedRecord,
  ChecksumMismatch,
  RepresentationMismatch,
  CalibrationFailure,
  Uncalibrated,
  DigestMissing,
  DigestMismatch,
  TimestampDisorder,
  MalformedFrame,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` carries the failure kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

enum class Finger : std::uint8_t { Thumb = 0, Index, Middle, Ring, Pinky };

inline constexpr std::size_t kNumFingers = 5;
inline constexpr std::size_t kNumJoints = 15;
inline constexpr std::size_t kNumMotors = 11;
inline constexpr std::size_t kKeypointsPerFinger = 5;
inline constexpr std::size_t kJointsPerFinger = 3;

inline constexpr std::array<Finger, kNumFingers> kAllFingers = {
    Finger::Thumb, Finger::Index, Finger::Middle, Finger::Ring, Finger::Pinky};

inline constexpr std::size_t index_of(Finger f) { return static_cast<std::size_t>(f); }

std::string_view finger_name(Finger f);
Finger finger_from_name(std::string_view name);

/// Motors driving a finger: 3 for the thumb, 2 (MCP, coupled PIP/DIP) otherwise.
inline constexpr std::size_t motor_count(Finger f) { return f == Finger::Thumb ? 3 : 2; }

/// Offset of the finger's first motor in the 11-motor vector.
inline constexpr std::size_t motor_offset(Finger f) {
  return f == Finger::Thumb ? 0 : 3 + 2 * (index_of(f) - 1);
}

/// Offset of the finger's first joint in the 15-joint vector.
inline constexpr std::size_t joint_offset(Finger f) { return 3 * index_of(f); }

// 64-bit FNV-1a, used for provenance digests and file checksums.
class Fnv1a {
 public:
  void update(std::string_view bytes) noexcept {
    for (unsigned char c : bytes) {
      hash_ ^= c;
      hash_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t value() const noexcept { return hash_; }
  std::string hex() const;

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

std::string digest_of(std::string_view bytes);

/// Derives an independent stream seed from a master seed and a stream index.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double deg2rad(double d) { return d * kPi / 180.0; }
inline constexpr double rad2deg(double r) { return r * 180.0 / kPi; }

}  // namespace ruka
