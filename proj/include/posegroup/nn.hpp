#pragma once

#include <vector>

#include <Eigen/Core>

#include "posegroup/rng.hpp"

namespace posegroup {

struct Linear {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;  // out
};

// Small fully-connected network evaluated column-batched: inputs and outputs
// are (dim x batch) matrices. relu[i] says whether layer i is followed by a
// rectifier.
struct Mlp {
  std::vector<Linear> layers;
  std::vector<uint8_t> relu;

  int in_dim() const { return static_cast<int>(layers.front().W.cols()); }
  int out_dim() const { return static_cast<int>(layers.back().W.rows()); }
};

Linear make_linear(int out, int in, Rng& rng);  // Glorot-uniform W, zero bias
Mlp make_mlp(const std::vector<int>& widths, const std::vector<uint8_t>& relu, Rng& rng);

Linear zeros_like(const Linear& l);
Mlp zeros_like(const Mlp& m);

// act[0] is the input, act[i+1] the post-activation output of layer i.
struct MlpTrace {
  std::vector<Eigen::MatrixXd> act;
};

Eigen::MatrixXd mlp_forward(const Mlp& mlp, const Eigen::MatrixXd& x,
                            MlpTrace* trace = nullptr);

// Accumulates parameter gradients into `grad` (shaped like `mlp`) and
// returns the gradient with respect to the input batch.
Eigen::MatrixXd mlp_backward(const Mlp& mlp, const MlpTrace& trace,
                             Eigen::MatrixXd d_out, Mlp& grad);

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// Binary cross-entropy on a logit, the usual overflow-safe form.
inline double bce_with_logit(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace posegroup
