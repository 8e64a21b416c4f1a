#pragma once

#include <string>
#include <vector>

#include "posegroup/appnet.hpp"
#include "posegroup/geonet.hpp"
#include "posegroup/skeleton.hpp"

namespace posegroup {

enum class Branch { Geo, App, Full };

Branch branch_from_string(const std::string& s);
std::string to_string(Branch b);

struct ModelConfig {
  int hidden = 256;
  int geo_iterations = 3;
  int app_iterations = 2;
  int appearance_dim = 8;
};

// Every learnable weight in the pipeline, bound to a skeleton by hash.
struct ModelParams {
  GeoParams geo;
  AppParams app;
  FuseParams fuse;
  uint64_t skeleton_hash = 0;
  int version = 1;
};

ModelParams init_model(const SkeletonSpec& spec, const ModelConfig& cfg, uint64_t seed);
ModelParams zeros_like(const ModelParams& p);
ModelConfig config_of(const ModelParams& p);

// Flat named view over one weight array. Enumeration order is fixed, and
// names are stable; checkpoints and the optimizer key off them. Views into
// a const model must be treated as read-only.
struct ParamView {
  std::string name;
  double* data = nullptr;
  long rows = 0;
  long cols = 0;
  long size() const { return rows * cols; }
};

std::vector<ParamView> list_params(const ModelParams& p);

bool all_params_finite(const ModelParams& p);

struct ModelTrace {
  GeoTrace geo;
  AppTrace app;
  FuseTrace fuse;
};

struct ModelForward {
  GeoResult geo;
  AppResult app;
  AffinityMatrix fused;  // empty unless branch == Full
  bool single_node = false;
};

// Run the branches requested: Geo or App alone, or both plus fusion.
ModelForward model_forward(const DetectionGraph& graph, const ModelParams& params,
                           Branch branch = Branch::Full, ModelTrace* trace = nullptr);

}  // namespace posegroup
