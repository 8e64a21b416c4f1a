#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "posegroup/geonet.hpp"

namespace posegroup {

// Thresholded affinity matrix: symmetric {0,1}, zero diagonal.
struct BinaryAdjacency {
  Eigen::MatrixXi adj;
  int size() const { return static_cast<int>(adj.rows()); }
};

// Entry-wise threshold; values equal to tau round up to 1.
BinaryAdjacency binarize(const Eigen::MatrixXd& affinity, double tau = 0.5);

// Number of near-zero eigenvalues of the unnormalized Laplacian L = D - A,
// counted below epsilon * max(1, largest eigenvalue). For a binary graph
// this equals the number of connected components.
int estimate_cluster_count(const BinaryAdjacency& adj, double epsilon = 1e-8);

// Cluster label per node from k-means over the rows of the eigenvector
// matrix of the k smallest Laplacian eigenvalues. Greedy farthest-point
// seeding, fixed seed, 10 restarts, best inertia wins; fully deterministic.
std::vector<int> spectral_partition(const BinaryAdjacency& adj, int k);

// One extracted person candidate: at most one detection per joint type.
// Score is the mean affinity among selected pairs (0 for single joints).
struct PoseInstance {
  std::map<int, int> joints;  // joint type -> detection id
  double score = 0.0;
};

// Constrained subset extraction within one cluster: per joint type, start
// from the node with maximal mean affinity to the cluster, then run
// replacement passes (swap in any same-type node with strictly higher
// average affinity to the other selected nodes) until stable. The selected
// pose is emitted, its nodes removed, and the process repeats on the
// remainder until every node is consumed.
std::vector<PoseInstance> extract_poses(const std::vector<int>& cluster_nodes,
                                        const Eigen::MatrixXd& affinity,
                                        const DetectionGraph& graph);

// Full grouping pipeline: binarize, estimate the cluster count, spectral
// partition, then per-cluster pose extraction. Every node ends up in
// exactly one pose.
std::vector<PoseInstance> group_detections(const AffinityMatrix& fused,
                                           const DetectionGraph& graph,
                                           double tau = 0.5);

std::string poses_to_json(const std::vector<PoseInstance>& poses,
                          const DetectionGraph& graph, const SkeletonSpec* spec);
void save_poses(const std::vector<PoseInstance>& poses, const DetectionGraph& graph,
                const SkeletonSpec* spec, const std::string& path);

}  // namespace posegroup
