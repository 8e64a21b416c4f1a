#include "posegroup/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "posegroup/errors.hpp"
#include "posegroup/rng.hpp"

namespace posegroup {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

// Articulated 2D template: a kinematic tree with limb lengths given as
// fractions of the person scale and limb directions sampled inside fixed
// angular ranges (image frame, y pointing down, -90 deg = up).
struct TemplateLimb {
  int parent;
  int node;
  double length;
  double angle_deg;
  double range_deg;
};

struct PoseTemplate {
  std::string name;
  std::vector<int> emit_type;  // per node: joint type index, or -1 (virtual)
  std::vector<TemplateLimb> limbs;  // topological order, node 0 is the root
};

PoseTemplate compact7_template() {
  // Node order: pelvis, neck, head, left_wrist, right_wrist, left_ankle, right_ankle.
  PoseTemplate t;
  t.name = "compact7";
  t.emit_type = {4, 1, 0, 2, 3, 5, 6};
  t.limbs = {
      {0, 1, 0.40, -90.0, 10.0},  // pelvis -> neck
      {1, 2, 0.15, -90.0, 15.0},  // neck -> head
      {1, 3, 0.32, 55.0, 70.0},   // neck -> left wrist
      {1, 4, 0.32, 125.0, 70.0},  // neck -> right wrist
      {0, 5, 0.45, 70.0, 25.0},   // pelvis -> left ankle
      {0, 6, 0.45, 110.0, 25.0},  // pelvis -> right ankle
  };
  return t;
}

PoseTemplate coco17_template() {
  // Nodes 0/1 are virtual pelvis/neck anchors; the rest map to coco17 types.
  PoseTemplate t;
  t.name = "coco17";
  t.emit_type = {-1, -1, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16};
  t.limbs = {
      {0, 1, 0.42, -90.0, 8.0},    // pelvis -> neck
      {1, 2, 0.16, -90.0, 18.0},   // neck -> nose
      {2, 3, 0.04, -55.0, 20.0},   // nose -> left eye
      {2, 4, 0.04, -125.0, 20.0},  // nose -> right eye
      {3, 5, 0.055, 15.0, 20.0},   // left eye -> left ear
      {4, 6, 0.055, 165.0, 20.0},  // right eye -> right ear
      {1, 7, 0.12, 25.0, 12.0},    // neck -> left shoulder
      {1, 8, 0.12, 155.0, 12.0},   // neck -> right shoulder
      {7, 9, 0.17, 75.0, 65.0},    // left shoulder -> left elbow
      {9, 11, 0.16, 75.0, 75.0},   // left elbow -> left wrist
      {8, 10, 0.17, 105.0, 65.0},  // right shoulder -> right elbow
      {10, 12, 0.16, 105.0, 75.0}, // right elbow -> right wrist
      {0, 13, 0.07, 25.0, 12.0},   // pelvis -> left hip
      {0, 14, 0.07, 155.0, 12.0},  // pelvis -> right hip
      {13, 15, 0.22, 85.0, 30.0},  // left hip -> left knee
      {15, 17, 0.21, 85.0, 25.0},  // left knee -> left ankle
      {14, 16, 0.22, 95.0, 30.0},  // right hip -> right knee
      {16, 18, 0.21, 95.0, 25.0},  // right knee -> right ankle
  };
  return t;
}

const PoseTemplate& pose_template(const std::string& name) {
  static const PoseTemplate compact7 = compact7_template();
  static const PoseTemplate coco17 = coco17_template();
  if (name == "compact7") return compact7;
  if (name == "coco17") return coco17;
  throw ConfigError("unknown skeleton template \"" + name + "\" (expected compact7 or coco17)");
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void validate_gen(const GenConfig& cfg) {
  if (cfg.min_persons < 0 || cfg.max_persons < cfg.min_persons) {
    throw ConfigError("generator config: empty person-count range [" +
                      std::to_string(cfg.min_persons) + ", " +
                      std::to_string(cfg.max_persons) + "]");
  }
  if (!(cfg.scale_min > 0.0) || cfg.scale_max < cfg.scale_min) {
    throw ConfigError("generator config: invalid scale range");
  }
  if (cfg.overlap < 0.0 || cfg.overlap > 1.0) {
    throw ConfigError("generator config: overlap must be in [0, 1]");
  }
  if (cfg.joint_dropout < 0.0 || cfg.joint_dropout > 1.0) {
    throw ConfigError("generator config: joint_dropout must be in [0, 1]");
  }
  if (cfg.outlier_rate < 0.0 || cfg.outlier_rate > 1.0) {
    throw ConfigError("generator config: outlier_rate must be in [0, 1]");
  }
}

void validate_noise(const NoiseConfig& cfg) {
  if (cfg.jitter_sigma < 0.0) {
    throw ConfigError("noise config: jitter_sigma must be non-negative");
  }
  if (cfg.duplicate_prob < 0.0 || cfg.duplicate_prob > 1.0 ||
      cfg.miss_prob < 0.0 || cfg.miss_prob > 1.0) {
    throw ConfigError("noise config: probabilities must be in [0, 1]");
  }
  if (cfg.appearance_dim < 1) {
    throw ConfigError("noise config: appearance_dim must be at least 1");
  }
  if (cfg.appearance_noise < 0.0) {
    throw ConfigError("noise config: appearance_noise must be non-negative");
  }
}

}  // namespace

SkeletonSpec skeleton_for_template(const std::string& name) {
  if (name == "compact7") return compact7_skeleton();
  if (name == "coco17") return coco17_skeleton();
  throw ConfigError("unknown skeleton template \"" + name + "\"");
}

Scene sample_scene(const GenConfig& cfg, uint64_t seed) {
  validate_gen(cfg);
  const PoseTemplate& tmpl = pose_template(cfg.skeleton);
  const int num_types = skeleton_for_template(cfg.skeleton).num_types();
  Rng rng(seed);

  Scene scene;
  scene.seed = seed;
  const int count = rng.uniform_int(cfg.min_persons, cfg.max_persons);
  const double spread = std::max(0.02, 0.45 * (1.0 - cfg.overlap));

  for (int p = 0; p < count; ++p) {
    const double s = rng.uniform(cfg.scale_min, cfg.scale_max);
    const double ax = 0.5 + rng.uniform(-spread, spread);
    const double ay = 0.5 + rng.uniform(-spread, spread);

    std::vector<double> px(tmpl.emit_type.size()), py(tmpl.emit_type.size());
    px[0] = ax;
    py[0] = ay;
    for (const auto& limb : tmpl.limbs) {
      const double a = kDegToRad * rng.uniform(limb.angle_deg - limb.range_deg,
                                               limb.angle_deg + limb.range_deg);
      px[limb.node] = px[limb.parent] + limb.length * s * std::cos(a);
      py[limb.node] = py[limb.parent] + limb.length * s * std::sin(a);
    }

    Person person;
    person.scale = s;
    int first_emittable = -1;
    Keypoint first_kp;
    for (size_t n = 0; n < tmpl.emit_type.size(); ++n) {
      const int type = tmpl.emit_type[n];
      if (type < 0) continue;
      Keypoint kp{clamp01(px[n]), clamp01(py[n]), type};
      if (first_emittable < 0) {
        first_emittable = type;
        first_kp = kp;
      }
      if (rng.uniform() < cfg.joint_dropout) continue;
      person.joints[type] = kp;
    }
    // A person must keep at least one labeled joint.
    if (person.joints.empty()) person.joints[first_emittable] = first_kp;
    scene.persons.push_back(std::move(person));
  }

  size_t total_joints = 0;
  for (const auto& p : scene.persons) total_joints += p.joints.size();
  for (size_t i = 0; i < total_joints; ++i) {
    if (rng.uniform() < cfg.outlier_rate) {
      Keypoint kp{rng.uniform(), rng.uniform(), rng.uniform_int(0, num_types - 1)};
      scene.outliers.push_back(kp);
    }
  }
  return scene;
}

DetectionSet render_detections(const Scene& scene, const NoiseConfig& cfg,
                               uint64_t seed) {
  validate_noise(cfg);
  Rng rng(seed);
  const int dim = cfg.appearance_dim;

  auto unit_vector = [&]() {
    Eigen::VectorXd v(dim);
    double norm = 0.0;
    do {
      for (int i = 0; i < dim; ++i) v[i] = rng.normal();
      norm = v.norm();
    } while (norm < 1e-12);
    return Eigen::VectorXd(v / norm);
  };

  std::vector<Eigen::VectorXd> person_tag;
  person_tag.reserve(scene.persons.size());
  for (size_t p = 0; p < scene.persons.size(); ++p) person_tag.push_back(unit_vector());

  DetectionSet out;
  out.appearance_dim = dim;

  auto emit = [&](const Keypoint& kp, double conf_lo, double conf_hi,
                  const Eigen::VectorXd& tag) {
    Detection d;
    d.id = static_cast<int>(out.detections.size());
    d.keypoint.x = clamp01(kp.x + cfg.jitter_sigma * rng.normal());
    d.keypoint.y = clamp01(kp.y + cfg.jitter_sigma * rng.normal());
    d.keypoint.type_index = kp.type_index;
    d.confidence = rng.uniform(conf_lo, conf_hi);
    d.appearance = tag;
    for (int i = 0; i < dim; ++i) d.appearance[i] += cfg.appearance_noise * rng.normal();
    out.detections.push_back(std::move(d));
  };

  for (size_t p = 0; p < scene.persons.size(); ++p) {
    for (const auto& [type, kp] : scene.persons[p].joints) {
      (void)type;
      if (rng.uniform() < cfg.miss_prob) continue;
      emit(kp, 0.5, 1.0, person_tag[p]);
      if (rng.uniform() < cfg.duplicate_prob) emit(kp, 0.3, 1.0, person_tag[p]);
    }
  }
  for (const auto& kp : scene.outliers) {
    emit(kp, 0.1, 0.7, unit_vector());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

nlohmann::json keypoint_to_json(const Keypoint& kp) {
  return {{"type", kp.type_index}, {"x", kp.x}, {"y", kp.y}};
}

Keypoint keypoint_from_json(const nlohmann::json& j) {
  Keypoint kp;
  kp.type_index = j.at("type").get<int>();
  kp.x = j.at("x").get<double>();
  kp.y = j.at("y").get<double>();
  return kp;
}

template <typename Fn>
auto with_schema(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(std::string(what) + ": cannot open \"" + path + "\"");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text, const char* what) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(std::string(what) + ": cannot write \"" + path + "\"");
  out << text;
}

}  // namespace

std::string scene_to_json(const Scene& scene) {
  nlohmann::json j;
  j["seed"] = scene.seed;
  j["persons"] = nlohmann::json::array();
  for (const auto& p : scene.persons) {
    nlohmann::json jp;
    jp["scale"] = p.scale;
    jp["joints"] = nlohmann::json::array();
    for (const auto& [type, kp] : p.joints) {
      (void)type;
      jp["joints"].push_back(keypoint_to_json(kp));
    }
    j["persons"].push_back(std::move(jp));
  }
  j["outliers"] = nlohmann::json::array();
  for (const auto& kp : scene.outliers) j["outliers"].push_back(keypoint_to_json(kp));
  return j.dump(2) + "\n";
}

Scene scene_from_json(const std::string& text) {
  return with_schema("scene file", [&] {
    nlohmann::json j = nlohmann::json::parse(text);
    Scene scene;
    scene.seed = j.at("seed").get<uint64_t>();
    for (const auto& jp : j.at("persons")) {
      Person p;
      p.scale = jp.at("scale").get<double>();
      for (const auto& jk : jp.at("joints")) {
        Keypoint kp = keypoint_from_json(jk);
        p.joints[kp.type_index] = kp;
      }
      if (p.joints.empty()) throw ConfigError("scene file: person with no joints");
      scene.persons.push_back(std::move(p));
    }
    for (const auto& jk : j.at("outliers")) scene.outliers.push_back(keypoint_from_json(jk));
    return scene;
  });
}

void save_scene(const Scene& scene, const std::string& path) {
  write_file(path, scene_to_json(scene), "scene file");
}

Scene load_scene(const std::string& path) {
  return scene_from_json(read_file(path, "scene file"));
}

std::string detections_to_json(const DetectionSet& dets) {
  nlohmann::json j;
  j["appearance_dim"] = dets.appearance_dim;
  j["detections"] = nlohmann::json::array();
  for (const auto& d : dets.detections) {
    nlohmann::json jd;
    jd["id"] = d.id;
    jd["type"] = d.keypoint.type_index;
    jd["x"] = d.keypoint.x;
    jd["y"] = d.keypoint.y;
    jd["confidence"] = d.confidence;
    jd["appearance"] = std::vector<double>(d.appearance.data(),
                                           d.appearance.data() + d.appearance.size());
    j["detections"].push_back(std::move(jd));
  }
  return j.dump(2) + "\n";
}

DetectionSet detections_from_json(const std::string& text) {
  return with_schema("detections file", [&] {
    nlohmann::json j = nlohmann::json::parse(text);
    DetectionSet out;
    out.appearance_dim = j.at("appearance_dim").get<int>();
    if (out.appearance_dim < 1) throw ConfigError("detections file: appearance_dim must be >= 1");
    for (const auto& jd : j.at("detections")) {
      Detection d;
      d.id = jd.at("id").get<int>();
      d.keypoint.type_index = jd.at("type").get<int>();
      d.keypoint.x = jd.at("x").get<double>();
      d.keypoint.y = jd.at("y").get<double>();
      d.confidence = jd.at("confidence").get<double>();
      auto app = jd.at("appearance").get<std::vector<double>>();
      if (static_cast<int>(app.size()) != out.appearance_dim) {
        throw ConfigError("detections file: appearance vector of detection " +
                          std::to_string(d.id) + " has wrong dimension");
      }
      d.appearance = Eigen::Map<const Eigen::VectorXd>(app.data(), app.size());
      out.detections.push_back(std::move(d));
    }
    return out;
  });
}

void save_detections(const DetectionSet& dets, const std::string& path) {
  write_file(path, detections_to_json(dets), "detections file");
}

DetectionSet load_detections(const std::string& path) {
  return detections_from_json(read_file(path, "detections file"));
}

namespace {

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                const char* what) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) {
      if (it.key() == k) { ok = true; break; }
    }
    if (!ok) throw ConfigError(std::string(what) + ": unknown key \"" + it.key() + "\"");
  }
}

GenConfig gen_config_from(const nlohmann::json& j) {
  check_keys(j, {"skeleton", "min_persons", "max_persons", "scale_min", "scale_max",
                 "overlap", "joint_dropout", "outlier_rate"}, "generator config");
  GenConfig cfg;
  read_key(j, "skeleton", cfg.skeleton);
  read_key(j, "min_persons", cfg.min_persons);
  read_key(j, "max_persons", cfg.max_persons);
  read_key(j, "scale_min", cfg.scale_min);
  read_key(j, "scale_max", cfg.scale_max);
  read_key(j, "overlap", cfg.overlap);
  read_key(j, "joint_dropout", cfg.joint_dropout);
  read_key(j, "outlier_rate", cfg.outlier_rate);
  return cfg;
}

NoiseConfig noise_config_from(const nlohmann::json& j) {
  check_keys(j, {"jitter_sigma", "duplicate_prob", "miss_prob", "appearance_dim",
                 "appearance_noise"}, "noise config");
  NoiseConfig cfg;
  read_key(j, "jitter_sigma", cfg.jitter_sigma);
  read_key(j, "duplicate_prob", cfg.duplicate_prob);
  read_key(j, "miss_prob", cfg.miss_prob);
  read_key(j, "appearance_dim", cfg.appearance_dim);
  read_key(j, "appearance_noise", cfg.appearance_noise);
  return cfg;
}

}  // namespace

GenConfig gen_config_from_json(const std::string& text) {
  return with_schema("generator config", [&] {
    return gen_config_from(nlohmann::json::parse(text));
  });
}

NoiseConfig noise_config_from_json(const std::string& text) {
  return with_schema("noise config", [&] {
    return noise_config_from(nlohmann::json::parse(text));
  });
}

DatasetConfig dataset_config_from_json(const std::string& text) {
  return with_schema("dataset config", [&] {
    nlohmann::json j = nlohmann::json::parse(text);
    // A full train config wraps the dataset under "data"; accept both so
    // one file can drive synth, train, and eval.
    if (j.contains("data")) j = j.at("data");
    check_keys(j, {"generator", "noise"}, "dataset config");
    DatasetConfig cfg;
    if (j.contains("generator")) cfg.gen = gen_config_from(j.at("generator"));
    if (j.contains("noise")) cfg.noise = noise_config_from(j.at("noise"));
    return cfg;
  });
}

DatasetConfig load_dataset_config(const std::string& path) {
  return dataset_config_from_json(read_file(path, "dataset config"));
}

SceneStream::Item SceneStream::at(int index) const {
  Item item;
  item.scene = sample_scene(gen_, derive_seed(base_, 2 * stream_, index));
  item.dets = render_detections(item.scene, noise_, derive_seed(base_, 2 * stream_ + 1, index));
  return item;
}

}  // namespace posegroup
