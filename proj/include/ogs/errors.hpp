#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ogs {

/// Base of every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An object was used out of sequence, e.g. a backward pass after the map changed.
class InvalidState : public Error {
 public:
  using Error::Error;
};

/// Rotation too close to pi for a well-conditioned logarithm.
class NearSingularity : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class ProviderError : public Error {
 public:
  ProviderError(const std::string& what, std::uint64_t frame_a, std::uint64_t frame_b)
      : Error("pair (" + std::to_string(frame_a) + ", " + std::to_string(frame_b) + "): " + what),
        frame_a_(frame_a),
        frame_b_(frame_b) {}
  std::uint64_t frame_a() const { return frame_a_; }
  std::uint64_t frame_b() const { return frame_b_; }

 private:
  std::uint64_t frame_a_;
  std::uint64_t frame_b_;
};

/// Too few or unusable inputs for an estimator to even start.
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

/// RANSAC ran but found no acceptable consensus.
class PnpDegenerate : public Error {
 public:
  using Error::Error;
};

class InsufficientMatches : public Error {
 public:
  using Error::Error;
};

}  // namespace ogs
