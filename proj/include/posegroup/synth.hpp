#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "posegroup/skeleton.hpp"

namespace posegroup {

// One ground-truth person: labeled joints keyed by type index (the labeled
// set may be partial), plus the scale the generator drew for it.
struct Person {
  std::map<int, Keypoint> joints;
  double scale = 0.0;
};

// Ground truth for one generated image: persons plus unattributed keypoints
// ("outliers", standing in for unannotated people and detector phantoms).
struct Scene {
  std::vector<Person> persons;
  std::vector<Keypoint> outliers;
  uint64_t seed = 0;
};

// One identity-free joint detection as a downstream module sees it.
struct Detection {
  int id = 0;
  Keypoint keypoint;
  double confidence = 1.0;  // >= 0.1 for everything emitted here
  Eigen::VectorXd appearance;
};

struct DetectionSet {
  std::vector<Detection> detections;
  int appearance_dim = 0;
};

// Scene-generation knobs.
struct GenConfig {
  std::string skeleton = "compact7";  // template name: "compact7" or "coco17"
  int min_persons = 1;
  int max_persons = 4;
  double scale_min = 0.18;
  double scale_max = 0.35;
  double overlap = 0.3;        // 0 = spread across the frame, 1 = stacked
  double joint_dropout = 0.0;  // probability a joint is unlabeled
  double outlier_rate = 0.0;   // expected outliers per labeled joint
};

// Detector-noise knobs.
struct NoiseConfig {
  double jitter_sigma = 0.0;     // coordinate noise, in normalized units
  double duplicate_prob = 0.0;   // chance of a second detection per joint
  double miss_prob = 0.0;        // chance a labeled joint goes undetected
  int appearance_dim = 8;
  double appearance_noise = 0.0; // per-component sigma on the identity tag
};

// Draw a multi-person scene from the articulated template named in `cfg`.
// Deterministic in (cfg, seed).
Scene sample_scene(const GenConfig& cfg, uint64_t seed);

// Emulate a keypoint detector over the scene: jittered detections for
// labeled joints (with misses and duplicates), one detection per scene
// outlier, and per-person identity tags as appearance vectors.
// Ids are consecutive from 0 in emission order.
DetectionSet render_detections(const Scene& scene, const NoiseConfig& cfg,
                               uint64_t seed);

// JSON (de)serialization; schemas documented in the README.
std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);
void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

std::string detections_to_json(const DetectionSet& dets);
DetectionSet detections_from_json(const std::string& text);
void save_detections(const DetectionSet& dets, const std::string& path);
DetectionSet load_detections(const std::string& path);

GenConfig gen_config_from_json(const std::string& text);
NoiseConfig noise_config_from_json(const std::string& text);

// Combined {"generator": {...}, "noise": {...}} file used by the CLI.
struct DatasetConfig {
  GenConfig gen;
  NoiseConfig noise;
};
DatasetConfig dataset_config_from_json(const std::string& text);
DatasetConfig load_dataset_config(const std::string& path);

// Skeleton catalog matching a generator template.
SkeletonSpec skeleton_for_template(const std::string& name);

// Deterministic (scene, detections) source: item i is generated from seeds
// derived from (base_seed, stream, i). Separate streams keep training and
// held-out data disjoint.
class SceneStream {
 public:
  SceneStream(GenConfig gen, NoiseConfig noise, uint64_t base_seed, uint64_t stream)
      : gen_(std::move(gen)), noise_(noise), base_(base_seed), stream_(stream) {}

  struct Item {
    Scene scene;
    DetectionSet dets;
  };
  Item at(int index) const;

  const GenConfig& gen() const { return gen_; }
  const NoiseConfig& noise() const { return noise_; }

 private:
  GenConfig gen_;
  NoiseConfig noise_;
  uint64_t base_;
  uint64_t stream_;
};

}  // namespace posegroup
