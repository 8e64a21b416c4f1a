#pragma once

#include <vector>

#include <Eigen/Core>

#include "posegroup/graph.hpp"
#include "posegroup/nn.hpp"

namespace posegroup {

// All unordered node pairs of a graph. `a[e] < b[e]` are storage indices;
// `a_first[e]` says whether a is the canonical tail of the pair under
// (type, detection id) order, which is independent of storage order.
struct PairList {
  int num_nodes = 0;
  std::vector<int> a, b;
  std::vector<uint8_t> a_first;
  Eigen::MatrixXi index;  // (m,n) -> pair id, -1 on the diagonal

  int count() const { return static_cast<int>(a.size()); }
};

PairList make_pair_list(const DetectionGraph& graph);

// Affinity estimate for every node pair: probabilities and the pre-sigmoid
// logits they came from. Symmetric, diagonal unused (kept at zero).
struct AffinityMatrix {
  Eigen::MatrixXd prob;
  Eigen::MatrixXd logit;

  int size() const { return static_cast<int>(prob.rows()); }
};

// Row-wise L1 normalization within each joint type, diagonal excluded.
// Groups that sum to zero are left at zero.
Eigen::MatrixXd normalize_rows_by_type(const Eigen::MatrixXd& a,
                                       const std::vector<int>& types);

// Geometry branch parameters. Edge encoders are keyed by unordered type
// pair and shared across iterations; node encoders and the affinity head
// have one set of weights per iteration.
struct GeoParams {
  int hidden = 256;
  int iterations = 3;
  int num_types = 0;
  std::vector<Mlp> f_edge;               // [pair_index(ja, jb)]: 2 -> h -> h
  std::vector<std::vector<Mlp>> f_node;  // [iteration][type]: h -> h -> h
  std::vector<Mlp> f_geo;                // [iteration]: 3h -> h -> 1

  int pair_index(int ja, int jb) const;
  int num_type_pairs() const { return num_types * (num_types + 1) / 2; }
};

GeoParams init_geo_params(int num_types, int hidden, int iterations, Rng& rng);

// Displacement encodings, one per unordered pair, shared by both directions
// and across iterations.
struct EdgeEmbeddings {
  PairList pairs;
  Eigen::MatrixXd emb;  // hidden x count
};

struct EdgeEmbedTrace {
  std::vector<std::vector<int>> cols;  // pair ids per type-pair bucket
  std::vector<int> bucket_pair;        // type-pair index per bucket
  std::vector<MlpTrace> mlp;
};

EdgeEmbeddings embed_edges(const DetectionGraph& graph, const GeoParams& params,
                           EdgeEmbedTrace* trace = nullptr);

struct GeoIterTrace {
  Eigen::MatrixXd a_prev;
  Eigen::MatrixXd atilde;
  Eigen::MatrixXd agg;                      // hidden x N
  std::vector<std::vector<int>> node_cols;  // per type
  std::vector<MlpTrace> node_mlp;
  Eigen::MatrixXd nodes;                    // hidden x N
  Eigen::MatrixXd z_fwd, z_rev;             // hidden x E, post-relu
  Eigen::VectorXd logit;                    // per pair, direction-averaged
};

struct GeoIterOut {
  Eigen::MatrixXd nodes;
  AffinityMatrix A;
};

// One refinement step: aggregate edge encodings with the type-normalized
// previous affinities, encode nodes, then rescore every pair. The two
// directed scores of a pair are averaged before the sigmoid, so the output
// is exactly symmetric.
GeoIterOut geo_iterate(const std::vector<int>& types, const EdgeEmbeddings& emb,
                       const Eigen::MatrixXd& a_prev, const GeoParams& params,
                       int iteration, GeoIterTrace* trace = nullptr);

struct GeoTrace {
  std::vector<int> types;
  EdgeEmbeddings emb;
  EdgeEmbedTrace emb_trace;
  std::vector<GeoIterTrace> iters;
};

struct GeoResult {
  std::vector<AffinityMatrix> iters;  // one per iteration, last feeds fusion
  bool single_node = false;
};

// Full geometry branch: embeddings once, then `iterations` refinement steps
// starting from an all-ones affinity prior.
GeoResult geo_forward(const DetectionGraph& graph, const GeoParams& params,
                      GeoTrace* trace = nullptr);

// Reverse pass. d_logit_direct[l][e] is the loss gradient applied directly
// to iteration l's pair logits (supervision and, for the last iteration,
// fusion). Cross-iteration flow through the normalized affinities is
// handled here. Parameter gradients accumulate into `grad`.
void geo_backward(const GeoParams& params, const GeoTrace& trace,
                  const std::vector<Eigen::VectorXd>& d_logit_direct,
                  GeoParams& grad);

GeoParams zeros_like(const GeoParams& p);

}  // namespace posegroup
