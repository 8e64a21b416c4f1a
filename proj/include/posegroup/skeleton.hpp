#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace posegroup {

// Joint-type catalog plus the per-type falloff constants used by the
// keypoint similarity measure.
struct SkeletonSpec {
  std::vector<std::string> type_names;
  std::vector<double> kappa;  // strictly positive, one per type

  int num_types() const { return static_cast<int>(type_names.size()); }

  // Digest over names and kappa bit patterns; stored in checkpoints so a
  // model cannot silently be applied to a different joint catalog.
  uint64_t content_hash() const;
};

// A single keypoint in normalized image coordinates.
struct Keypoint {
  double x = 0.0;  // in [0, 1]
  double y = 0.0;  // in [0, 1]
  int type_index = 0;
};

// Gaussian keypoint similarity: exp(-d^2 / (2 s^2 kappa^2)).
// `object_scale` is the per-person scale s; both keypoints must share a type.
double oks(const Keypoint& det, const Keypoint& gt, double object_scale,
           const SkeletonSpec& spec);

// Built-in catalogs. coco17 mirrors the usual 17-keypoint set with uniform
// kappa 0.8; compact7 is the small catalog used by the synthetic benchmarks.
SkeletonSpec coco17_skeleton();
SkeletonSpec compact7_skeleton();

// Resolve a name ("coco17", "compact7") or a path to a JSON config file.
SkeletonSpec resolve_skeleton(const std::string& name_or_path);

// Load and validate a skeleton config file:
//   {"names": ["head", ...], "kappa": [0.8, ...]}
// "kappa" may also be a single number applied to every type.
SkeletonSpec load_skeleton(const std::string& path);
SkeletonSpec parse_skeleton_json(const std::string& text);

}  // namespace posegroup
