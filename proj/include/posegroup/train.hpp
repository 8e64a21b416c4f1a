#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "posegroup/checkpoint.hpp"
#include "posegroup/model.hpp"
#include "posegroup/synth.hpp"

namespace posegroup {

struct TrainConfig {
  DatasetConfig data;
  int steps = 1000;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 1;
  Branch branch = Branch::Full;
  ModelConfig model;
  int grad_accumulation = 1;  // graphs per update; 1 = one graph per step
  int eval_every = 0;         // 0 disables held-out progress evaluation
  int scenes_per_eval = 20;
  int log_every = 200;
};

TrainConfig train_config_from_json(const std::string& text);
TrainConfig load_train_config(const std::string& path);

// Exact reverse-mode gradients of the masked loss for the requested branch,
// accumulated into `grads` (shaped like `params`). Returns the loss.
// A graph with no edges contributes nothing.
LossBreakdown compute_gradients(const ModelParams& params, const DetectionGraph& graph,
                                const EdgeLabels& labels, Branch branch,
                                ModelParams& grads);

struct LossRow {
  int step = 0;
  double total = 0.0, geo = 0.0, app = 0.0, fuse = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<LossRow> history;
};

// One graph at a time: sample scene, render detections, label, forward,
// backward, Adam update. Deterministic in (stream, config).
TrainResult train(const SceneStream& stream, const TrainConfig& cfg,
                  const SkeletonSpec& spec, std::ostream* log = nullptr);

// CSV: step,total,geo,app,fuse
void write_loss_history(const std::vector<LossRow>& history, std::ostream& out);

// Unmasked edge accuracy of one affinity matrix against labels; empty when
// no edge is supervised.
std::optional<double> matrix_edge_accuracy(const AffinityMatrix& a,
                                           const EdgeLabels& labels, double tau = 0.5);

}  // namespace posegroup
