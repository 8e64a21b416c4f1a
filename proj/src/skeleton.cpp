#include "posegroup/skeleton.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "posegroup/errors.hpp"

namespace posegroup {

namespace {

uint64_t fnv1a(uint64_t h, const void* data, size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

uint64_t SkeletonSpec::content_hash() const {
  uint64_t h = 0xcbf29ce484222325ull;
  for (size_t i = 0; i < type_names.size(); ++i) {
    h = fnv1a(h, type_names[i].data(), type_names[i].size());
    h = fnv1a(h, "\0", 1);
    uint64_t bits;
    static_assert(sizeof(bits) == sizeof(double));
    std::memcpy(&bits, &kappa[i], sizeof(bits));
    h = fnv1a(h, &bits, sizeof(bits));
  }
  return h;
}

double oks(const Keypoint& det, const Keypoint& gt, double object_scale,
           const SkeletonSpec& spec) {
  if (det.type_index != gt.type_index) {
    throw std::invalid_argument("oks: keypoint types differ (" +
                                std::to_string(det.type_index) + " vs " +
                                std::to_string(gt.type_index) + ")");
  }
  if (!(object_scale > 0.0)) {
    throw std::invalid_argument("oks: object_scale must be positive");
  }
  double k = spec.kappa.at(det.type_index);
  double dx = det.x - gt.x;
  double dy = det.y - gt.y;
  double d2 = dx * dx + dy * dy;
  return std::exp(-d2 / (2.0 * object_scale * object_scale * k * k));
}

SkeletonSpec coco17_skeleton() {
  SkeletonSpec s;
  s.type_names = {"nose",        "left_eye",   "right_eye",  "left_ear",
                  "right_ear",   "left_shoulder", "right_shoulder",
                  "left_elbow",  "right_elbow", "left_wrist", "right_wrist",
                  "left_hip",    "right_hip",  "left_knee",  "right_knee",
                  "left_ankle",  "right_ankle"};
  s.kappa.assign(s.type_names.size(), 0.8);
  return s;
}

SkeletonSpec compact7_skeleton() {
  SkeletonSpec s;
  s.type_names = {"head",       "neck",        "left_wrist", "right_wrist",
                  "pelvis",     "left_ankle",  "right_ankle"};
  s.kappa.assign(s.type_names.size(), 0.8);
  return s;
}

namespace {

SkeletonSpec validate(SkeletonSpec s) {
  if (s.type_names.empty()) {
    throw ConfigError("skeleton config: \"names\" must list at least one joint type");
  }
  if (s.kappa.size() != s.type_names.size()) {
    throw ConfigError("skeleton config: \"kappa\" has " + std::to_string(s.kappa.size()) +
                      " entries for " + std::to_string(s.type_names.size()) + " names");
  }
  std::set<std::string> seen;
  for (const auto& n : s.type_names) {
    if (!seen.insert(n).second) {
      throw ConfigError("skeleton config: duplicate type name \"" + n + "\"");
    }
  }
  for (size_t i = 0; i < s.kappa.size(); ++i) {
    if (!(s.kappa[i] > 0.0)) {
      throw ConfigError("skeleton config: kappa for type \"" + s.type_names[i] +
                        "\" must be strictly positive");
    }
  }
  return s;
}

}  // namespace

SkeletonSpec parse_skeleton_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("skeleton config: invalid JSON: ") + e.what());
  }
  SkeletonSpec s;
  if (!j.contains("names")) throw ConfigError("skeleton config: missing \"names\"");
  s.type_names = j.at("names").get<std::vector<std::string>>();
  if (!j.contains("kappa")) throw ConfigError("skeleton config: missing \"kappa\"");
  if (j.at("kappa").is_number()) {
    s.kappa.assign(s.type_names.size(), j.at("kappa").get<double>());
  } else {
    s.kappa = j.at("kappa").get<std::vector<double>>();
  }
  return validate(std::move(s));
}

SkeletonSpec load_skeleton(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("skeleton config: cannot open \"" + path + "\"");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_skeleton_json(ss.str());
}

SkeletonSpec resolve_skeleton(const std::string& name_or_path) {
  if (name_or_path == "coco17") return coco17_skeleton();
  if (name_or_path == "compact7") return compact7_skeleton();
  return load_skeleton(name_or_path);
}

}  // namespace posegroup
