#include <doctest.h>

#include "posegroup/errors.hpp"
#include "posegroup/synth.hpp"

using namespace posegroup;

namespace {

GenConfig basic_gen() {
  GenConfig cfg;
  cfg.skeleton = "compact7";
  cfg.min_persons = 2;
  cfg.max_persons = 4;
  return cfg;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("no dropout labels every joint") {
  GenConfig cfg = basic_gen();
  cfg.min_persons = cfg.max_persons = 1;
  cfg.joint_dropout = 0.0;
  Scene scene = sample_scene(cfg, 42);
  REQUIRE(scene.persons.size() == 1);
  CHECK(scene.persons[0].joints.size() == 7);
}

TEST_CASE("person count range is honored") {
  GenConfig cfg = basic_gen();
  cfg.min_persons = cfg.max_persons = 3;
  CHECK(sample_scene(cfg, 1).persons.size() == 3);
  CHECK(sample_scene(cfg, 2).persons.size() == 3);

  cfg.min_persons = 1;
  cfg.max_persons = 5;
  for (uint64_t s = 0; s < 20; ++s) {
    size_t n = sample_scene(cfg, s).persons.size();
    CHECK(n >= 1);
    CHECK(n <= 5);
  }
}

TEST_CASE("scenes are bit-identical for equal config and seed") {
  GenConfig cfg = basic_gen();
  cfg.joint_dropout = 0.3;
  cfg.outlier_rate = 0.2;
  CHECK(scene_to_json(sample_scene(cfg, 77)) == scene_to_json(sample_scene(cfg, 77)));
  CHECK(scene_to_json(sample_scene(cfg, 77)) != scene_to_json(sample_scene(cfg, 78)));
}

TEST_CASE("every person keeps at least one joint under full dropout") {
  GenConfig cfg = basic_gen();
  cfg.joint_dropout = 1.0;
  Scene scene = sample_scene(cfg, 5);
  for (const auto& p : scene.persons) CHECK(p.joints.size() == 1);
}

TEST_CASE("all coordinates stay inside the unit square") {
  GenConfig cfg = basic_gen();
  cfg.max_persons = 6;
  cfg.overlap = 0.0;
  cfg.scale_max = 0.6;  // large enough to hit the borders
  cfg.outlier_rate = 0.3;
  NoiseConfig noise;
  noise.jitter_sigma = 0.2;
  for (uint64_t s = 0; s < 10; ++s) {
    Scene scene = sample_scene(cfg, s);
    for (const auto& p : scene.persons) {
      for (const auto& [t, kp] : p.joints) {
        CHECK(kp.x >= 0.0);
        CHECK(kp.x <= 1.0);
        CHECK(kp.y >= 0.0);
        CHECK(kp.y <= 1.0);
      }
    }
    DetectionSet dets = render_detections(scene, noise, s + 100);
    for (const auto& d : dets.detections) {
      CHECK(d.keypoint.x >= 0.0);
      CHECK(d.keypoint.x <= 1.0);
      CHECK(d.keypoint.y >= 0.0);
      CHECK(d.keypoint.y <= 1.0);
      CHECK(d.confidence >= 0.1);
    }
  }
}

TEST_CASE("generator rejects bad configs") {
  GenConfig cfg = basic_gen();
  cfg.min_persons = 3;
  cfg.max_persons = 2;
  CHECK_THROWS_WITH_AS(sample_scene(cfg, 0), doctest::Contains("person-count range"),
                       ConfigError);
  cfg = basic_gen();
  cfg.skeleton = "nope";
  CHECK_THROWS_AS(sample_scene(cfg, 0), ConfigError);
}

TEST_CASE("noiseless rendering reproduces ground truth exactly") {
  GenConfig cfg = basic_gen();
  Scene scene = sample_scene(cfg, 9);
  NoiseConfig noise;  // all zero
  DetectionSet dets = render_detections(scene, noise, 1);

  size_t labeled = 0;
  for (const auto& p : scene.persons) labeled += p.joints.size();
  REQUIRE(dets.detections.size() == labeled);

  size_t i = 0;
  for (const auto& p : scene.persons) {
    for (const auto& [t, kp] : p.joints) {
      CHECK(dets.detections[i].keypoint.x == kp.x);
      CHECK(dets.detections[i].keypoint.y == kp.y);
      CHECK(dets.detections[i].keypoint.type_index == t);
      CHECK(dets.detections[i].id == static_cast<int>(i));
      ++i;
    }
  }
}

TEST_CASE("duplicate probability one doubles every joint") {
  GenConfig cfg = basic_gen();
  Scene scene = sample_scene(cfg, 10);
  NoiseConfig noise;
  noise.duplicate_prob = 1.0;
  DetectionSet dets = render_detections(scene, noise, 2);
  size_t labeled = 0;
  for (const auto& p : scene.persons) labeled += p.joints.size();
  CHECK(dets.detections.size() == 2 * labeled);
}

TEST_CASE("zero appearance noise gives identical per-person tags") {
  GenConfig cfg = basic_gen();
  cfg.min_persons = cfg.max_persons = 2;
  Scene scene = sample_scene(cfg, 11);
  NoiseConfig noise;
  noise.appearance_noise = 0.0;
  noise.duplicate_prob = 0.5;
  DetectionSet dets = render_detections(scene, noise, 3);

  // Detections of one person share a tag exactly; distinct persons differ.
  for (const auto& d : dets.detections) CHECK(d.appearance.size() == 8);
  std::vector<Eigen::VectorXd> tags;
  for (const auto& d : dets.detections) {
    bool found = false;
    for (const auto& t : tags) {
      if ((t - d.appearance).norm() == 0.0) found = true;
    }
    if (!found) tags.push_back(d.appearance);
  }
  CHECK(tags.size() == 2);
}

TEST_CASE("render rejects negative sigma") {
  Scene scene = sample_scene(basic_gen(), 1);
  NoiseConfig noise;
  noise.jitter_sigma = -0.1;
  CHECK_THROWS_AS(render_detections(scene, noise, 0), ConfigError);
}

TEST_CASE("detections render deterministically") {
  GenConfig cfg = basic_gen();
  cfg.outlier_rate = 0.2;
  Scene scene = sample_scene(cfg, 12);
  NoiseConfig noise;
  noise.jitter_sigma = 0.01;
  noise.duplicate_prob = 0.1;
  noise.miss_prob = 0.1;
  noise.appearance_noise = 0.3;
  CHECK(detections_to_json(render_detections(scene, noise, 5)) ==
        detections_to_json(render_detections(scene, noise, 5)));
}

TEST_CASE("scene and detection files round-trip") {
  GenConfig cfg = basic_gen();
  cfg.outlier_rate = 0.3;
  Scene scene = sample_scene(cfg, 13);
  CHECK(scene_to_json(scene_from_json(scene_to_json(scene))) == scene_to_json(scene));

  NoiseConfig noise;
  noise.jitter_sigma = 0.004;
  noise.appearance_noise = 0.2;
  DetectionSet dets = render_detections(scene, noise, 6);
  CHECK(detections_to_json(detections_from_json(detections_to_json(dets))) ==
        detections_to_json(dets));
}

TEST_CASE("outliers land in scenes at roughly the configured rate") {
  GenConfig cfg = basic_gen();
  cfg.min_persons = cfg.max_persons = 4;
  cfg.outlier_rate = 0.5;
  size_t outliers = 0, joints = 0;
  for (uint64_t s = 0; s < 30; ++s) {
    Scene scene = sample_scene(cfg, s);
    outliers += scene.outliers.size();
    for (const auto& p : scene.persons) joints += p.joints.size();
  }
  double rate = static_cast<double>(outliers) / joints;
  CHECK(rate > 0.35);
  CHECK(rate < 0.65);
}

TEST_CASE("dataset config parser is strict about keys") {
  CHECK_THROWS_WITH_AS(
      dataset_config_from_json(R"({"generator": {"min_person": 1}})"),
      doctest::Contains("unknown key"), ConfigError);
  DatasetConfig cfg = dataset_config_from_json(
      R"({"generator": {"min_persons": 2, "max_persons": 5}, "noise": {"jitter_sigma": 0.01}})");
  CHECK(cfg.gen.min_persons == 2);
  CHECK(cfg.noise.jitter_sigma == 0.01);
}

}  // TEST_SUITE
