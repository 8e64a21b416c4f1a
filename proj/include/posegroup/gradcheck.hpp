#pragma once

#include <string>
#include <vector>

#include "posegroup/model.hpp"

namespace posegroup {

struct GradCheckOptions {
  uint64_t seed = 1;
  int num_nodes = 8;
  int num_types = 4;
  ModelConfig model;
  double step = 1e-5;          // central-difference step
  double tolerance = 1e-4;     // relative error bound
  int coords_per_group = 20;   // sampled coordinates per weight group
  int probes_per_group = 5;    // random-direction probes per weight group
};

struct GradCheckGroup {
  std::string group;
  double max_rel_err = 0.0;
  int checked = 0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  bool pass = true;
};

// Verifies the analytic gradients of every weight group against central
// finite differences of the loss on a random labeled graph. The numeric
// side uses only forward evaluations, independent of the backward pass it
// checks. Coordinates whose gradient sits below the finite-difference noise
// floor are covered by whole-group directional probes instead.
GradCheckReport run_gradient_check(const GradCheckOptions& opt);

void print_gradcheck_report(const GradCheckReport& report, std::ostream& out);

}  // namespace posegroup
