#include "posegroup/partition.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "posegroup/errors.hpp"
#include "posegroup/rng.hpp"

namespace posegroup {

BinaryAdjacency binarize(const Eigen::MatrixXd& affinity, double tau) {
  const int n = static_cast<int>(affinity.rows());
  if (affinity.cols() != n) {
    throw std::invalid_argument("binarize: affinity matrix must be square");
  }
  BinaryAdjacency out;
  out.adj = Eigen::MatrixXi::Zero(n, n);
  for (int m = 0; m < n; ++m) {
    for (int k = m + 1; k < n; ++k) {
      const int v = affinity(m, k) >= tau ? 1 : 0;
      out.adj(m, k) = out.adj(k, m) = v;
    }
  }
  return out;
}

namespace {

Eigen::MatrixXd laplacian(const BinaryAdjacency& adj) {
  const Eigen::MatrixXd a = adj.adj.cast<double>();
  Eigen::MatrixXd l = -a;
  l.diagonal() = a.rowwise().sum();
  return l;
}

}  // namespace

int estimate_cluster_count(const BinaryAdjacency& adj, double epsilon) {
  const int n = adj.size();
  if (n < 1) throw std::invalid_argument("estimate_cluster_count: empty adjacency");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(laplacian(adj),
                                                        Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericError("estimate_cluster_count: eigensolver failed to converge");
  }
  const Eigen::VectorXd& ev = solver.eigenvalues();  // ascending
  const double cutoff = epsilon * std::max(1.0, ev[n - 1]);
  int k = 0;
  while (k < n && ev[k] < cutoff) ++k;
  return k;
}

namespace {

struct KmeansResult {
  std::vector<int> labels;
  double inertia = 0.0;
};

// Deterministic k-means over row-points: restart seeds come from a fixed
// generator, centers after the first are farthest-point picks, ties always
// resolve to the lowest index.
KmeansResult kmeans_rows(const Eigen::MatrixXd& pts, int k, int restarts, int max_iter,
                         uint64_t seed) {
  const int n = static_cast<int>(pts.rows());
  Rng rng(seed);
  KmeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();

  for (int r = 0; r < restarts; ++r) {
    Eigen::MatrixXd centers(k, pts.cols());
    centers.row(0) = pts.row(rng.uniform_int(0, n - 1));
    Eigen::VectorXd min_d2 =
        (pts.rowwise() - centers.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
      int far = 0;
      for (int i = 1; i < n; ++i) {
        if (min_d2[i] > min_d2[far]) far = i;
      }
      centers.row(c) = pts.row(far);
      min_d2 = min_d2.cwiseMin(
          (pts.rowwise() - centers.row(c)).rowwise().squaredNorm());
    }

    std::vector<int> labels(n, -1);
    for (int iter = 0; iter < max_iter; ++iter) {
      bool changed = false;
      for (int i = 0; i < n; ++i) {
        int arg = 0;
        double bestd = (pts.row(i) - centers.row(0)).squaredNorm();
        for (int c = 1; c < k; ++c) {
          const double d = (pts.row(i) - centers.row(c)).squaredNorm();
          if (d < bestd) {
            bestd = d;
            arg = c;
          }
        }
        if (labels[i] != arg) {
          labels[i] = arg;
          changed = true;
        }
      }
      if (!changed) break;

      Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, pts.cols());
      std::vector<int> count(k, 0);
      for (int i = 0; i < n; ++i) {
        sum.row(labels[i]) += pts.row(i);
        ++count[labels[i]];
      }
      for (int c = 0; c < k; ++c) {
        if (count[c] > 0) {
          centers.row(c) = sum.row(c) / count[c];
        } else {
          // Reseat an emptied center at the point farthest from its own.
          int far = 0;
          double fard = -1.0;
          for (int i = 0; i < n; ++i) {
            const double d = (pts.row(i) - centers.row(labels[i])).squaredNorm();
            if (d > fard) {
              fard = d;
              far = i;
            }
          }
          centers.row(c) = pts.row(far);
        }
      }
    }

    double inertia = 0.0;
    for (int i = 0; i < n; ++i) {
      inertia += (pts.row(i) - centers.row(labels[i])).squaredNorm();
    }
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.labels = labels;
    }
  }
  return best;
}

constexpr uint64_t kKmeansSeed = 0x9c0ffee1u;

}  // namespace

std::vector<int> spectral_partition(const BinaryAdjacency& adj, int k) {
  const int n = adj.size();
  if (k < 1 || k > n) {
    throw std::invalid_argument("spectral_partition: k = " + std::to_string(k) +
                                " out of range [1, " + std::to_string(n) + "]");
  }
  if (k == 1) return std::vector<int>(n, 0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(laplacian(adj));
  if (solver.info() != Eigen::Success) {
    throw NumericError("spectral_partition: eigensolver failed to converge");
  }
  const Eigen::MatrixXd embedding = solver.eigenvectors().leftCols(k);
  return kmeans_rows(embedding, k, /*restarts=*/10, /*max_iter=*/100, kKmeansSeed).labels;
}

namespace {

double avg_affinity(int candidate, const std::vector<int>& others,
                    const Eigen::MatrixXd& a) {
  if (others.empty()) return 0.0;
  double s = 0.0;
  for (int o : others) s += a(candidate, o);
  return s / static_cast<double>(others.size());
}

}  // namespace

std::vector<PoseInstance> extract_poses(const std::vector<int>& cluster_nodes,
                                        const Eigen::MatrixXd& affinity,
                                        const DetectionGraph& graph) {
  if (cluster_nodes.empty()) {
    throw std::invalid_argument("extract_poses: empty cluster");
  }
  std::vector<int> pool = cluster_nodes;
  std::sort(pool.begin(), pool.end());

  std::vector<PoseInstance> poses;
  while (!pool.empty()) {
    // Seed one node per joint type: the one with maximal mean affinity to
    // the whole remaining pool.
    std::map<int, double> pool_mean;  // node -> mean affinity to other pool nodes
    for (int v : pool) {
      double s = 0.0;
      for (int u : pool) {
        if (u != v) s += affinity(v, u);
      }
      pool_mean[v] = pool.size() > 1 ? s / static_cast<double>(pool.size() - 1) : 0.0;
    }
    std::map<int, int> selected;  // type -> node
    for (int v : pool) {
      const int t = graph.types[v];
      auto it = selected.find(t);
      if (it == selected.end()) {
        selected[t] = v;
      } else if (pool_mean[v] > pool_mean[it->second]) {
        it->second = v;
      }
    }

    // Replacement passes: each swap strictly raises the candidate's average
    // affinity to the rest of the subset, so the total pairwise affinity of
    // the subset strictly grows and the loop terminates.
    bool changed = true;
    while (changed) {
      changed = false;
      for (auto& [type, incumbent] : selected) {
        std::vector<int> others;
        others.reserve(selected.size() - 1);
        for (const auto& [t2, v2] : selected) {
          if (t2 != type) others.push_back(v2);
        }
        if (others.empty()) continue;
        int best = incumbent;
        double best_avg = avg_affinity(incumbent, others, affinity);
        for (int c : pool) {
          if (graph.types[c] != type || c == incumbent) continue;
          const double a = avg_affinity(c, others, affinity);
          if (a > best_avg) {
            best_avg = a;
            best = c;
          }
        }
        if (best != incumbent) {
          incumbent = best;
          changed = true;
        }
      }
    }

    PoseInstance pose;
    double sum = 0.0;
    int pairs = 0;
    for (const auto& [ta, va] : selected) {
      pose.joints[ta] = graph.nodes[va].id;
      for (const auto& [tb, vb] : selected) {
        if (ta < tb) {
          sum += affinity(va, vb);
          ++pairs;
        }
      }
    }
    pose.score = pairs > 0 ? sum / pairs : 0.0;
    poses.push_back(std::move(pose));

    std::set<int> taken;
    for (const auto& [t, v] : selected) taken.insert(v);
    std::erase_if(pool, [&](int v) { return taken.count(v) > 0; });
  }
  return poses;
}

std::vector<PoseInstance> group_detections(const AffinityMatrix& fused,
                                           const DetectionGraph& graph,
                                           double tau) {
  BinaryAdjacency adj = binarize(fused.prob, tau);
  const int k = estimate_cluster_count(adj);
  const std::vector<int> labels = spectral_partition(adj, k);

  std::vector<PoseInstance> poses;
  for (int c = 0; c < k; ++c) {
    std::vector<int> cluster;
    for (int i = 0; i < graph.size(); ++i) {
      if (labels[i] == c) cluster.push_back(i);
    }
    if (cluster.empty()) continue;
    auto sub = extract_poses(cluster, fused.prob, graph);
    poses.insert(poses.end(), std::make_move_iterator(sub.begin()),
                 std::make_move_iterator(sub.end()));
  }
  return poses;
}

std::string poses_to_json(const std::vector<PoseInstance>& poses,
                          const DetectionGraph& graph, const SkeletonSpec* spec) {
  std::map<int, const Detection*> by_id;
  for (const auto& d : graph.nodes) by_id[d.id] = &d;

  nlohmann::json j;
  j["poses"] = nlohmann::json::array();
  for (size_t i = 0; i < poses.size(); ++i) {
    nlohmann::json jp;
    jp["id"] = i;
    jp["score"] = poses[i].score;
    jp["joints"] = nlohmann::json::array();
    for (const auto& [type, det_id] : poses[i].joints) {
      nlohmann::json jj;
      jj["type"] = type;
      if (spec && type < spec->num_types()) jj["name"] = spec->type_names[type];
      jj["detection_id"] = det_id;
      const Detection* d = by_id.at(det_id);
      jj["x"] = d->keypoint.x;
      jj["y"] = d->keypoint.y;
      jp["joints"].push_back(std::move(jj));
    }
    j["poses"].push_back(std::move(jp));
  }
  return j.dump(2) + "\n";
}

void save_poses(const std::vector<PoseInstance>& poses, const DetectionGraph& graph,
                const SkeletonSpec* spec, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("poses file: cannot write \"" + path + "\"");
  out << poses_to_json(poses, graph, spec);
}

}  // namespace posegroup
