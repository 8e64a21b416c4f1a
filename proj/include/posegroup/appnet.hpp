#pragma once

#include <vector>

#include <Eigen/Core>

#include "posegroup/geonet.hpp"

namespace posegroup {

// Appearance branch parameters: a per-type affine projection of the raw
// appearance vectors, then per-iteration scoring and node-update networks.
struct AppParams {
  int hidden = 256;
  int iterations = 2;
  int num_types = 0;
  int appearance_dim = 8;
  std::vector<Linear> input_map;  // [type]: appearance_dim -> h
  std::vector<Mlp> g_app;         // [iteration]: h -> h -> 1
  std::vector<Mlp> g_node;        // [iteration]: 2h -> h -> h
};

AppParams init_app_params(int num_types, int appearance_dim, int hidden,
                          int iterations, Rng& rng);
AppParams zeros_like(const AppParams& p);

struct AppIterTrace {
  Eigen::MatrixXd nodes_prev;  // h x N
  Eigen::MatrixXd sgn;         // h x E, sign(node_a - node_b)
  MlpTrace app_mlp;
  Eigen::VectorXd logit;       // per pair
  Eigen::MatrixXd a_prev_prob; // the affinity used for aggregation (= this iter's A)
  Eigen::MatrixXd atilde;
  MlpTrace node_mlp;
};

struct AppIterOut {
  AffinityMatrix A;
  Eigen::MatrixXd nodes;  // h x N
};

// One appearance iteration: score all pairs from absolute feature
// differences (exactly symmetric), then refresh node features by
// affinity-weighted neighbor aggregation.
AppIterOut app_iterate(const Eigen::MatrixXd& nodes_prev, const std::vector<int>& types,
                       const PairList& pairs, const AppParams& params, int iteration,
                       AppIterTrace* trace = nullptr);

struct AppTrace {
  PairList pairs;
  std::vector<int> types;
  std::vector<std::vector<int>> input_cols;   // per type bucket
  std::vector<int> input_bucket_type;
  std::vector<Eigen::MatrixXd> input_batches; // raw appearance per bucket
  Eigen::MatrixXd nodes0;
  std::vector<AppIterTrace> iters;
};

struct AppResult {
  std::vector<AffinityMatrix> iters;
  bool single_node = false;
};

AppResult app_forward(const DetectionGraph& graph, const AppParams& params,
                      AppTrace* trace = nullptr);

void app_backward(const AppParams& params, const AppTrace& trace,
                  const std::vector<Eigen::VectorXd>& d_logit_direct,
                  AppParams& grad);

// Fusion head: a small MLP over the pre-sigmoid scores of the two branches,
// applied independently per edge.
struct FuseParams {
  Mlp h;  // 2 -> 16 -> 64 -> 64 -> 16 -> 1
};

FuseParams init_fuse_params(Rng& rng);
FuseParams zeros_like(const FuseParams& p);

struct FuseTrace {
  MlpTrace mlp;
  Eigen::VectorXd logit;
};

AffinityMatrix fuse(const Eigen::MatrixXd& geo_logit, const Eigen::MatrixXd& app_logit,
                    const FuseParams& params, FuseTrace* trace = nullptr);

// Backward for the fusion head: fills the gradients with respect to the two
// input logit vectors (per unordered pair, pair order of `pairs`).
void fuse_backward(const FuseParams& params, const FuseTrace& trace,
                   const Eigen::VectorXd& d_logit, FuseParams& grad,
                   Eigen::VectorXd& d_geo_logit, Eigen::VectorXd& d_app_logit);

// Total training loss and its per-branch decomposition: summed over
// supervised unordered edges, cross-entropy against the fused output plus
// iteration-averaged cross-entropy for each branch. Masked edges are
// skipped entirely, so they contribute exactly zero to value and gradient.
struct LossBreakdown {
  double total = 0.0;
  double geo = 0.0;
  double app = 0.0;
  double fuse = 0.0;
};

LossBreakdown affinity_loss(const std::vector<AffinityMatrix>& geo_iters,
                            const std::vector<AffinityMatrix>& app_iters,
                            const AffinityMatrix* fused, const EdgeLabels& labels);

}  // namespace posegroup
