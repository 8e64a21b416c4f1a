#include "posegroup/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace posegroup {

Linear make_linear(int out, int in, Rng& rng) {
  Linear l;
  l.W.resize(out, in);
  const double bound = std::sqrt(6.0 / (in + out));
  for (int c = 0; c < in; ++c) {
    for (int r = 0; r < out; ++r) l.W(r, c) = rng.uniform(-bound, bound);
  }
  l.b = Eigen::VectorXd::Zero(out);
  return l;
}

Mlp make_mlp(const std::vector<int>& widths, const std::vector<uint8_t>& relu, Rng& rng) {
  if (widths.size() < 2 || relu.size() != widths.size() - 1) {
    throw std::invalid_argument("make_mlp: widths/relu mismatch");
  }
  Mlp m;
  for (size_t i = 0; i + 1 < widths.size(); ++i) {
    m.layers.push_back(make_linear(widths[i + 1], widths[i], rng));
  }
  m.relu = relu;
  return m;
}

Linear zeros_like(const Linear& l) {
  return Linear{Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()),
                Eigen::VectorXd::Zero(l.b.size())};
}

Mlp zeros_like(const Mlp& m) {
  Mlp z;
  for (const auto& l : m.layers) z.layers.push_back(zeros_like(l));
  z.relu = m.relu;
  return z;
}

Eigen::MatrixXd mlp_forward(const Mlp& mlp, const Eigen::MatrixXd& x, MlpTrace* trace) {
  if (trace) {
    trace->act.clear();
    trace->act.push_back(x);
  }
  Eigen::MatrixXd h = x;
  for (size_t i = 0; i < mlp.layers.size(); ++i) {
    h = (mlp.layers[i].W * h).colwise() + mlp.layers[i].b;
    if (mlp.relu[i]) h = h.cwiseMax(0.0);
    if (trace) trace->act.push_back(h);
  }
  return h;
}

Eigen::MatrixXd mlp_backward(const Mlp& mlp, const MlpTrace& trace,
                             Eigen::MatrixXd d_out, Mlp& grad) {
  for (int i = static_cast<int>(mlp.layers.size()) - 1; i >= 0; --i) {
    if (mlp.relu[i]) {
      // Post-activation zero means the unit was clamped; zero subgradient.
      d_out = (trace.act[i + 1].array() > 0.0).select(d_out, 0.0);
    }
    grad.layers[i].W.noalias() += d_out * trace.act[i].transpose();
    grad.layers[i].b.noalias() += d_out.rowwise().sum();
    d_out = mlp.layers[i].W.transpose() * d_out;
  }
  return d_out;
}

}  // namespace posegroup
