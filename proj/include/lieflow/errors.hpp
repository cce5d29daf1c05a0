#pragma once

#include <stdexcept>
#include <string>

namespace lieflow {

// Error taxonomy shared across the library. Everything derives from
// std::runtime_error so call sites can catch broadly or by kind.

struct NotARotation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedPrimitive : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PointOutsideAabb : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PixelOutOfBounds : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptySchedule : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateConfiguration : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DatasetInvalid : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptySplit : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonFiniteLoss : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ChecksumError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct VersionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lieflow
