#pragma once

#include <string>

#include "posegroup/model.hpp"

namespace posegroup {

// Binary checkpoint: little-endian, versioned header (dimensions and the
// skeleton hash) followed by named flat float64 arrays with shapes.
// Round-trips are bit-exact. Layout documented in the README.
void save_checkpoint(const ModelParams& params, const std::string& path);

// Loads and validates against the expected skeleton. Distinct errors for
// wrong magic, unsupported version, skeleton-hash mismatch, and truncation.
ModelParams load_checkpoint(const std::string& path, const SkeletonSpec& spec);

}  // namespace posegroup
