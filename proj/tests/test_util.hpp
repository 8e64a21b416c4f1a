#pragma once

#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "posegroup/graph.hpp"
#include "posegroup/rng.hpp"

namespace posegroup::testutil {

// Independent connected-components oracle for the spectral pipeline.
class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(int a, int b) { parent_[find(a)] = find(b); }

  int components() {
    int c = 0;
    for (size_t i = 0; i < parent_.size(); ++i) {
      if (find(static_cast<int>(i)) == static_cast<int>(i)) ++c;
    }
    return c;
  }

  // Component id per element, numbered by first appearance.
  std::vector<int> labels() {
    std::vector<int> out(parent_.size(), -1);
    std::vector<int> id_of(parent_.size(), -1);
    int next = 0;
    for (size_t i = 0; i < parent_.size(); ++i) {
      int root = find(static_cast<int>(i));
      if (id_of[root] < 0) id_of[root] = next++;
      out[i] = id_of[root];
    }
    return out;
  }

 private:
  std::vector<int> parent_;
};

inline std::vector<int> component_labels(const Eigen::MatrixXi& adj) {
  const int n = static_cast<int>(adj.rows());
  UnionFind uf(n);
  for (int m = 0; m < n; ++m) {
    for (int k = m + 1; k < n; ++k) {
      if (adj(m, k) != 0) uf.unite(m, k);
    }
  }
  return uf.labels();
}

// Partition equality up to label renaming.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> fwd, rev;
  for (size_t i = 0; i < a.size(); ++i) {
    auto [it1, fresh1] = fwd.emplace(a[i], b[i]);
    if (!fresh1 && it1->second != b[i]) return false;
    auto [it2, fresh2] = rev.emplace(b[i], a[i]);
    if (!fresh2 && it2->second != a[i]) return false;
  }
  return true;
}

inline Eigen::MatrixXi random_binary_adjacency(int n, double density, Rng& rng) {
  Eigen::MatrixXi adj = Eigen::MatrixXi::Zero(n, n);
  for (int m = 0; m < n; ++m) {
    for (int k = m + 1; k < n; ++k) {
      if (rng.uniform() < density) adj(m, k) = adj(k, m) = 1;
    }
  }
  return adj;
}

// Small hand-rolled detection graph with random positions and appearances.
inline DetectionSet random_detections(int n, int num_types, int app_dim, Rng& rng) {
  DetectionSet dets;
  dets.appearance_dim = app_dim;
  for (int i = 0; i < n; ++i) {
    Detection d;
    d.id = i;
    d.keypoint.x = rng.uniform();
    d.keypoint.y = rng.uniform();
    d.keypoint.type_index = i < num_types ? i : rng.uniform_int(0, num_types - 1);
    d.confidence = rng.uniform(0.1, 1.0);
    d.appearance.resize(app_dim);
    for (int c = 0; c < app_dim; ++c) d.appearance[c] = rng.normal();
    dets.detections.push_back(std::move(d));
  }
  return dets;
}

}  // namespace posegroup::testutil
