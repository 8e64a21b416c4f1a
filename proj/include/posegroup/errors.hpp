#pragma once

#include <stdexcept>
#include <string>

namespace posegroup {

// Bad user-supplied configuration (files, CLI parameters, generator knobs).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values or eigensolver failure inside numeric code.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Model/params do not fit the data they are applied to.
struct ModelError : std::runtime_error {
  explicit ModelError(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint load failures, one kind per failure mode.
struct CheckpointError : std::runtime_error {
  enum class Kind { BadMagic, Version, SkeletonHash, Truncated, Format };
  CheckpointError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
  Kind kind;
};

}  // namespace posegroup
