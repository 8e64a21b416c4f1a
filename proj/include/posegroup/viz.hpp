#pragma once

#include <string>

#include "posegroup/geonet.hpp"

namespace posegroup {

// SVG rendering of a detection graph with predicted edges (affinity >= tau)
// drawn in red, plus a machine-readable JSON sidecar at <path>.json with
// every pair's score.
void export_viz(const DetectionGraph& graph, const AffinityMatrix& affinity,
                double tau, const std::string& path);

}  // namespace posegroup
