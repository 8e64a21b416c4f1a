#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <vector>

#include <Eigen/Core>

#include "posegroup/synth.hpp"

namespace posegroup {

// Fully-connected detection graph. Edges are implicit: every unordered pair
// of distinct nodes is an edge. Node order is (type_index, id) when built by
// build_graph; consumers must not rely on storage order beyond that.
struct DetectionGraph {
  std::vector<Detection> nodes;
  std::vector<int> types;  // type per node, aligned with `nodes`
  std::map<int, int> n_per_type;

  int size() const { return static_cast<int>(nodes.size()); }
};

DetectionGraph build_graph(const DetectionSet& dets);

// Where a detection landed in the ground truth.
struct JointRef {
  int person = 0;
  int type = 0;
  bool operator==(const JointRef&) const = default;
};

// Detection id -> ground-truth joint, or nullopt for unassigned ("outlier")
// detections. Several detections may share one ground-truth joint.
struct Assignment {
  std::map<int, std::optional<JointRef>> det_to_gt;
};

// Assign each detection to the same-type ground-truth joint of maximal
// similarity, if that similarity reaches `threshold`; ties go to the lowest
// person index. The per-person scale is sqrt(area of the tight bounding box
// over labeled joints), floored at 0.01.
Assignment assign_detections(const DetectionSet& dets, const Scene& scene,
                             const SkeletonSpec& spec, double threshold = 0.5);

double person_oks_scale(const Person& person);

// Ground-truth edge labels and the training mask.
//   label: 1 same person, 0 different persons, -1 unlabeled
//   mask:  1 supervised, 0 excluded from the loss
// Both symmetric; the diagonal is ignored by every consumer.
struct EdgeLabels {
  Eigen::MatrixXi label;
  Eigen::MatrixXi mask;

  int size() const { return static_cast<int>(label.rows()); }
};

// Labeling rules, applied in order:
//   1. both endpoints assigned to the same person        -> 1, supervised
//   2. endpoints assigned to different persons           -> 0, supervised
//   3. either endpoint unassigned                        -> masked out
//   4. for each person p, any edge between a detection assigned to p and a
//      detection of a type labeled on p but not assigned to p -> 0,
//      supervised. Applied last; may unmask edges masked by rule 3.
EdgeLabels label_edges(const DetectionGraph& graph, const Assignment& assignment,
                       const Scene& scene);

// Debug dump: row-major entries in {0,1,-1}, -1 where masked.
void write_adjacency_dump(const EdgeLabels& labels, std::ostream& out);

}  // namespace posegroup
