#include "posegroup/model.hpp"

#include <stdexcept>

#include "posegroup/errors.hpp"

namespace posegroup {

Branch branch_from_string(const std::string& s) {
  if (s == "geo") return Branch::Geo;
  if (s == "app") return Branch::App;
  if (s == "full") return Branch::Full;
  throw ConfigError("unknown branch \"" + s + "\" (expected geo, app, or full)");
}

std::string to_string(Branch b) {
  switch (b) {
    case Branch::Geo: return "geo";
    case Branch::App: return "app";
    default: return "full";
  }
}

ModelParams init_model(const SkeletonSpec& spec, const ModelConfig& cfg, uint64_t seed) {
  Rng rng(mix_seed(seed));
  ModelParams p;
  p.geo = init_geo_params(spec.num_types(), cfg.hidden, cfg.geo_iterations, rng);
  p.app = init_app_params(spec.num_types(), cfg.appearance_dim, cfg.hidden,
                          cfg.app_iterations, rng);
  p.fuse = init_fuse_params(rng);
  p.skeleton_hash = spec.content_hash();
  return p;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z;
  z.geo = zeros_like(p.geo);
  z.app = zeros_like(p.app);
  z.fuse = zeros_like(p.fuse);
  z.skeleton_hash = p.skeleton_hash;
  z.version = p.version;
  return z;
}

ModelConfig config_of(const ModelParams& p) {
  ModelConfig cfg;
  cfg.hidden = p.geo.hidden;
  cfg.geo_iterations = p.geo.iterations;
  cfg.app_iterations = p.app.iterations;
  cfg.appearance_dim = p.app.appearance_dim;
  return cfg;
}

namespace {

void add_mlp_views(std::vector<ParamView>& out, const std::string& prefix, const Mlp& m) {
  for (size_t i = 0; i < m.layers.size(); ++i) {
    const Linear& l = m.layers[i];
    out.push_back({prefix + ".layer" + std::to_string(i) + ".W",
                   const_cast<double*>(l.W.data()), l.W.rows(), l.W.cols()});
    out.push_back({prefix + ".layer" + std::to_string(i) + ".b",
                   const_cast<double*>(l.b.data()), l.b.size(), 1});
  }
}

}  // namespace

std::vector<ParamView> list_params(const ModelParams& p) {
  std::vector<ParamView> out;
  for (int ja = 0; ja < p.geo.num_types; ++ja) {
    for (int jb = ja; jb < p.geo.num_types; ++jb) {
      add_mlp_views(out, "geo.f_edge." + std::to_string(ja) + "_" + std::to_string(jb),
                    p.geo.f_edge[p.geo.pair_index(ja, jb)]);
    }
  }
  for (int l = 0; l < p.geo.iterations; ++l) {
    for (int j = 0; j < p.geo.num_types; ++j) {
      add_mlp_views(out, "geo.f_node.it" + std::to_string(l) + ".t" + std::to_string(j),
                    p.geo.f_node[l][j]);
    }
    add_mlp_views(out, "geo.f_geo.it" + std::to_string(l), p.geo.f_geo[l]);
  }
  for (int j = 0; j < p.app.num_types; ++j) {
    const Linear& l = p.app.input_map[j];
    std::string prefix = "app.input_map.t" + std::to_string(j);
    out.push_back({prefix + ".W", const_cast<double*>(l.W.data()), l.W.rows(), l.W.cols()});
    out.push_back({prefix + ".b", const_cast<double*>(l.b.data()), l.b.size(), 1});
  }
  for (int l = 0; l < p.app.iterations; ++l) {
    add_mlp_views(out, "app.g_app.it" + std::to_string(l), p.app.g_app[l]);
    add_mlp_views(out, "app.g_node.it" + std::to_string(l), p.app.g_node[l]);
  }
  add_mlp_views(out, "fuse.h", p.fuse.h);
  return out;
}

bool all_params_finite(const ModelParams& p) {
  for (const auto& v : list_params(p)) {
    for (long i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v.data[i])) return false;
    }
  }
  return true;
}

ModelForward model_forward(const DetectionGraph& graph, const ModelParams& params,
                           Branch branch, ModelTrace* trace) {
  ModelForward out;
  if (graph.size() < 2) {
    out.single_node = true;
    out.geo.single_node = true;
    out.app.single_node = true;
    return out;
  }
  if (branch == Branch::Geo || branch == Branch::Full) {
    out.geo = geo_forward(graph, params.geo, trace ? &trace->geo : nullptr);
  }
  if (branch == Branch::App || branch == Branch::Full) {
    out.app = app_forward(graph, params.app, trace ? &trace->app : nullptr);
  }
  if (branch == Branch::Full) {
    out.fused = fuse(out.geo.iters.back().logit, out.app.iters.back().logit,
                     params.fuse, trace ? &trace->fuse : nullptr);
  }
  return out;
}

}  // namespace posegroup
