#include "posegroup/eval.hpp"

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <map>
#include <set>

#include "posegroup/errors.hpp"
#include "posegroup/graph.hpp"
#include "posegroup/train.hpp"

namespace posegroup {

std::optional<double> edge_accuracy(const AffinityMatrix& pred, const EdgeLabels& labels,
                                    double tau) {
  if (pred.size() != labels.size()) {
    throw std::invalid_argument("edge_accuracy: matrix sizes differ");
  }
  return matrix_edge_accuracy(pred, labels, tau);
}

std::optional<double> PairMetrics::precision() const {
  const long denom = tp + fp;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(tp) / denom;
}

std::optional<double> PairMetrics::recall() const {
  const long denom = tp + fn;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(tp) / denom;
}

std::optional<double> PairMetrics::perfect_rate() const {
  if (persons_considered == 0) return std::nullopt;
  return static_cast<double>(persons_perfect) / persons_considered;
}

PairMetrics grouping_metrics(const std::vector<PoseInstance>& poses,
                             const DetectionSet& dets, const Scene& scene,
                             const SkeletonSpec& spec) {
  PairMetrics out;
  if (dets.detections.empty()) return out;

  DetectionGraph graph = build_graph(dets);
  Assignment assignment = assign_detections(dets, scene, spec);
  EdgeLabels labels = label_edges(graph, assignment, scene);

  std::map<int, int> pose_of;  // detection id -> pose index
  for (size_t i = 0; i < poses.size(); ++i) {
    for (const auto& [type, det_id] : poses[i].joints) {
      (void)type;
      pose_of[det_id] = static_cast<int>(i);
    }
  }

  const int n = graph.size();
  for (int m = 0; m < n; ++m) {
    for (int k = m + 1; k < n; ++k) {
      if (labels.mask(m, k) == 0) continue;
      auto pm = pose_of.find(graph.nodes[m].id);
      auto pk = pose_of.find(graph.nodes[k].id);
      const bool pred_same =
          pm != pose_of.end() && pk != pose_of.end() && pm->second == pk->second;
      const bool gt_same = labels.label(m, k) == 1;
      if (pred_same && gt_same) ++out.tp;
      if (pred_same && !gt_same) ++out.fp;
      if (!pred_same && gt_same) ++out.fn;
    }
  }

  // Assigned detection set per person.
  std::vector<std::set<int>> members(scene.persons.size());
  for (const auto& [det_id, ref] : assignment.det_to_gt) {
    if (ref) members[ref->person].insert(det_id);
  }
  std::vector<std::set<int>> pose_ids(poses.size());
  for (size_t i = 0; i < poses.size(); ++i) {
    for (const auto& [type, det_id] : poses[i].joints) {
      (void)type;
      pose_ids[i].insert(det_id);
    }
  }

  // Greedy one-to-one matching by overlap, ties toward lower person then
  // lower pose index.
  struct Cand {
    int overlap;
    int person;
    int pose;
  };
  std::vector<Cand> cands;
  for (size_t p = 0; p < members.size(); ++p) {
    if (members[p].empty()) continue;
    for (size_t i = 0; i < poses.size(); ++i) {
      int overlap = 0;
      for (int id : pose_ids[i]) overlap += members[p].count(id);
      if (overlap > 0) cands.push_back({overlap, static_cast<int>(p), static_cast<int>(i)});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (a.person != b.person) return a.person < b.person;
    return a.pose < b.pose;
  });
  std::set<int> used_person, used_pose;
  std::map<int, int> match;  // person -> pose
  for (const auto& c : cands) {
    if (used_person.count(c.person) || used_pose.count(c.pose)) continue;
    used_person.insert(c.person);
    used_pose.insert(c.pose);
    match[c.person] = c.pose;
  }

  for (size_t p = 0; p < members.size(); ++p) {
    if (members[p].empty()) continue;
    ++out.persons_considered;
    auto it = match.find(static_cast<int>(p));
    if (it != match.end() && pose_ids[it->second] == members[p]) ++out.persons_perfect;
  }
  return out;
}

namespace {

struct Accumulator {
  int scenes = 0;
  long fused_correct = 0, fused_total = 0;
  long geo_correct = 0, geo_total = 0;
  long app_correct = 0, app_total = 0;
  long ones = 0, supervised = 0;
  PairMetrics pairs;

  void add_matrix(const AffinityMatrix& a, const EdgeLabels& labels, double tau,
                  long& correct, long& total) {
    const int n = labels.size();
    for (int m = 0; m < n; ++m) {
      for (int k = m + 1; k < n; ++k) {
        if (labels.mask(m, k) == 0) continue;
        ++total;
        if ((a.prob(m, k) >= tau) == (labels.label(m, k) == 1)) ++correct;
      }
    }
  }

  EvalReport report() const {
    EvalReport r;
    r.scenes = scenes;
    if (fused_total > 0) r.edge_accuracy_fused = double(fused_correct) / fused_total;
    if (geo_total > 0) r.edge_accuracy_geo = double(geo_correct) / geo_total;
    if (app_total > 0) r.edge_accuracy_app = double(app_correct) / app_total;
    if (supervised > 0) r.label_balance = double(ones) / supervised;
    r.pair_precision = pairs.precision();
    r.pair_recall = pairs.recall();
    r.perfect_instance_rate = pairs.perfect_rate();
    return r;
  }
};

void eval_one(const ModelParams& params, const SkeletonSpec& spec, const Scene& scene,
              const DetectionSet& dets, const EvalOptions& opt, Accumulator& acc) {
  ++acc.scenes;
  if (dets.detections.size() < 2) return;
  DetectionGraph graph = build_graph(dets);
  Assignment assignment = assign_detections(dets, scene, spec);
  EdgeLabels labels = label_edges(graph, assignment, scene);

  ModelForward fwd = model_forward(graph, params, Branch::Full);
  acc.add_matrix(fwd.fused, labels, opt.tau, acc.fused_correct, acc.fused_total);
  acc.add_matrix(fwd.geo.iters.back(), labels, opt.tau, acc.geo_correct, acc.geo_total);
  acc.add_matrix(fwd.app.iters.back(), labels, opt.tau, acc.app_correct, acc.app_total);

  const int n = graph.size();
  for (int m = 0; m < n; ++m) {
    for (int k = m + 1; k < n; ++k) {
      if (labels.mask(m, k) == 0) continue;
      ++acc.supervised;
      if (labels.label(m, k) == 1) ++acc.ones;
    }
  }

  if (opt.with_grouping) {
    const AffinityMatrix& a = opt.grouping_affinity == Branch::Geo ? fwd.geo.iters.back()
                              : opt.grouping_affinity == Branch::App
                                  ? fwd.app.iters.back()
                                  : fwd.fused;
    auto poses = group_detections(a, graph, opt.tau);
    PairMetrics pm = grouping_metrics(poses, dets, scene, spec);
    acc.pairs.tp += pm.tp;
    acc.pairs.fp += pm.fp;
    acc.pairs.fn += pm.fn;
    acc.pairs.persons_considered += pm.persons_considered;
    acc.pairs.persons_perfect += pm.persons_perfect;
  }
}

}  // namespace

EvalReport evaluate(const ModelParams& params, const SkeletonSpec& spec,
                    const DatasetConfig& data, const EvalOptions& opt) {
  SceneStream stream(data.gen, data.noise, opt.seed, 0xE7A1);
  Accumulator acc;
  for (int i = 0; i < opt.scenes; ++i) {
    auto item = stream.at(i);
    eval_one(params, spec, item.scene, item.dets, opt, acc);
  }
  return acc.report();
}

EvalReport evaluate_files(const ModelParams& params, const SkeletonSpec& spec,
                          const std::string& dir, const EvalOptions& opt) {
  namespace fs = std::filesystem;
  std::vector<std::string> scene_files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("scene_", 0) == 0 && entry.path().extension() == ".json") {
      scene_files.push_back(entry.path().string());
    }
  }
  if (scene_files.empty()) {
    throw ConfigError("evaluate: no scene_*.json files in \"" + dir + "\"");
  }
  std::sort(scene_files.begin(), scene_files.end());

  Accumulator acc;
  for (const auto& path : scene_files) {
    std::string det_path = path;
    const auto pos = det_path.rfind("scene_");
    det_path.replace(pos, 6, "detections_");
    Scene scene = load_scene(path);
    DetectionSet dets = load_detections(det_path);
    eval_one(params, spec, scene, dets, opt, acc);
  }
  return acc.report();
}

namespace {

void put_metric(std::ostream& out, const char* name, const std::optional<double>& v) {
  out << name << '\t';
  if (v) {
    out << std::setprecision(17) << *v;
  } else {
    out << "absent";
  }
  out << '\n';
}

}  // namespace

void write_report(const EvalReport& report, std::ostream& out) {
  out << "scenes\t" << report.scenes << '\n';
  put_metric(out, "edge_accuracy", report.edge_accuracy_fused);
  put_metric(out, "edge_accuracy_geo", report.edge_accuracy_geo);
  put_metric(out, "edge_accuracy_app", report.edge_accuracy_app);
  put_metric(out, "pair_precision", report.pair_precision);
  put_metric(out, "pair_recall", report.pair_recall);
  put_metric(out, "perfect_instance_rate", report.perfect_instance_rate);
  put_metric(out, "label_balance", report.label_balance);
}

}  // namespace posegroup
