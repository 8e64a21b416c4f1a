#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "posegroup/model.hpp"
#include "posegroup/partition.hpp"

namespace posegroup {

// Fraction of supervised (unmasked) unordered edges whose thresholded
// prediction matches the label; empty when nothing is supervised.
std::optional<double> edge_accuracy(const AffinityMatrix& pred, const EdgeLabels& labels,
                                    double tau = 0.5);

// Pairwise grouping quality against ground truth. Precision/recall count
// supervised detection pairs (same predicted pose vs same ground-truth
// person); perfect rate is the fraction of persons with at least one
// assigned detection whose assigned set is recovered exactly as one pose
// under greedy one-to-one pose/person matching by overlap.
struct PairMetrics {
  long tp = 0, fp = 0, fn = 0;
  int persons_considered = 0;
  int persons_perfect = 0;

  std::optional<double> precision() const;
  std::optional<double> recall() const;
  std::optional<double> perfect_rate() const;
};

PairMetrics grouping_metrics(const std::vector<PoseInstance>& poses,
                             const DetectionSet& dets, const Scene& scene,
                             const SkeletonSpec& spec);

struct EvalReport {
  int scenes = 0;
  std::optional<double> edge_accuracy_fused;
  std::optional<double> edge_accuracy_geo;
  std::optional<double> edge_accuracy_app;
  std::optional<double> pair_precision;
  std::optional<double> pair_recall;
  std::optional<double> perfect_instance_rate;
  std::optional<double> label_balance;  // fraction of supervised edges labeled 1
};

struct EvalOptions {
  int scenes = 100;
  uint64_t seed = 0;
  double tau = 0.5;
  Branch grouping_affinity = Branch::Full;  // matrix handed to the grouper
  bool with_grouping = true;
};

// Evaluate a model over freshly generated scenes (stream tag distinct from
// training) or over (scene, detections) file pairs from a directory.
EvalReport evaluate(const ModelParams& params, const SkeletonSpec& spec,
                    const DatasetConfig& data, const EvalOptions& opt);
EvalReport evaluate_files(const ModelParams& params, const SkeletonSpec& spec,
                          const std::string& dir, const EvalOptions& opt);

// Tab-separated metric lines; unavailable metrics print "absent".
void write_report(const EvalReport& report, std::ostream& out);

}  // namespace posegroup
