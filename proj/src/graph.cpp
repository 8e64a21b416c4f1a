#include "posegroup/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "posegroup/errors.hpp"

namespace posegroup {

DetectionGraph build_graph(const DetectionSet& dets) {
  if (dets.detections.empty()) {
    throw std::invalid_argument("build_graph: empty detection set");
  }
  DetectionGraph g;
  g.nodes = dets.detections;
  std::sort(g.nodes.begin(), g.nodes.end(), [](const Detection& a, const Detection& b) {
    if (a.keypoint.type_index != b.keypoint.type_index) {
      return a.keypoint.type_index < b.keypoint.type_index;
    }
    return a.id < b.id;
  });
  std::set<int> ids;
  for (const auto& d : g.nodes) {
    if (!ids.insert(d.id).second) {
      throw std::invalid_argument("build_graph: duplicate detection id " +
                                  std::to_string(d.id));
    }
    g.types.push_back(d.keypoint.type_index);
    g.n_per_type[d.keypoint.type_index] += 1;
  }
  return g;
}

double person_oks_scale(const Person& person) {
  double min_x = 1.0, max_x = 0.0, min_y = 1.0, max_y = 0.0;
  for (const auto& [type, kp] : person.joints) {
    (void)type;
    min_x = std::min(min_x, kp.x);
    max_x = std::max(max_x, kp.x);
    min_y = std::min(min_y, kp.y);
    max_y = std::max(max_y, kp.y);
  }
  double area = std::max(0.0, max_x - min_x) * std::max(0.0, max_y - min_y);
  return std::max(0.01, std::sqrt(area));
}

Assignment assign_detections(const DetectionSet& dets, const Scene& scene,
                             const SkeletonSpec& spec, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("assign_detections: threshold must be in (0, 1)");
  }
  std::vector<double> scale(scene.persons.size());
  for (size_t p = 0; p < scene.persons.size(); ++p) {
    scale[p] = person_oks_scale(scene.persons[p]);
  }

  Assignment out;
  for (const auto& d : dets.detections) {
    std::optional<JointRef> best;
    double best_oks = 0.0;
    for (size_t p = 0; p < scene.persons.size(); ++p) {
      auto it = scene.persons[p].joints.find(d.keypoint.type_index);
      if (it == scene.persons[p].joints.end()) continue;
      double o = oks(d.keypoint, it->second, scale[p], spec);
      // Strict '>' keeps the lowest person index on ties.
      if (o >= threshold && o > best_oks) {
        best_oks = o;
        best = JointRef{static_cast<int>(p), d.keypoint.type_index};
      }
    }
    out.det_to_gt[d.id] = best;
  }
  return out;
}

EdgeLabels label_edges(const DetectionGraph& graph, const Assignment& assignment,
                       const Scene& scene) {
  const int n = graph.size();
  std::vector<std::optional<JointRef>> assigned(n);
  for (int i = 0; i < n; ++i) {
    auto it = assignment.det_to_gt.find(graph.nodes[i].id);
    if (it == assignment.det_to_gt.end()) {
      throw std::invalid_argument("label_edges: assignment is missing detection id " +
                                  std::to_string(graph.nodes[i].id));
    }
    assigned[i] = it->second;
  }

  EdgeLabels out;
  out.label = Eigen::MatrixXi::Constant(n, n, -1);
  out.mask = Eigen::MatrixXi::Zero(n, n);

  // Rules 1-3.
  for (int m = 0; m < n; ++m) {
    for (int k = m + 1; k < n; ++k) {
      if (assigned[m] && assigned[k]) {
        int v = assigned[m]->person == assigned[k]->person ? 1 : 0;
        out.label(m, k) = out.label(k, m) = v;
        out.mask(m, k) = out.mask(k, m) = 1;
      }
      // else: rule 3, stays masked and unlabeled
    }
  }

  // Rule 4: within the labeled type set of each person, detections assigned
  // to that person are known to differ from every competing detection of
  // those types, including unassigned ones.
  for (size_t p = 0; p < scene.persons.size(); ++p) {
    std::vector<int> members;  // I_p
    for (int i = 0; i < n; ++i) {
      if (assigned[i] && assigned[i]->person == static_cast<int>(p)) members.push_back(i);
    }
    if (members.empty()) continue;
    const auto& labeled = scene.persons[p].joints;  // keys = L_p
    for (int o = 0; o < n; ++o) {
      if (assigned[o] && assigned[o]->person == static_cast<int>(p)) continue;
      if (labeled.find(graph.types[o]) == labeled.end()) continue;
      for (int i : members) {
        if (i == o) continue;
        out.label(i, o) = out.label(o, i) = 0;
        out.mask(i, o) = out.mask(o, i) = 1;
      }
    }
  }
  return out;
}

void write_adjacency_dump(const EdgeLabels& labels, std::ostream& out) {
  const int n = labels.size();
  for (int m = 0; m < n; ++m) {
    for (int k = 0; k < n; ++k) {
      if (k > 0) out << ' ';
      out << (labels.mask(m, k) == 0 ? -1 : labels.label(m, k));
    }
    out << '\n';
  }
}

}  // namespace posegroup
