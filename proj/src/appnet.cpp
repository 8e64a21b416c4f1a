#include "posegroup/appnet.hpp"

#include <stdexcept>

#include "posegroup/errors.hpp"

namespace posegroup {

AppParams init_app_params(int num_types, int appearance_dim, int hidden,
                          int iterations, Rng& rng) {
  AppParams p;
  p.hidden = hidden;
  p.iterations = iterations;
  p.num_types = num_types;
  p.appearance_dim = appearance_dim;
  for (int j = 0; j < num_types; ++j) {
    p.input_map.push_back(make_linear(hidden, appearance_dim, rng));
  }
  for (int l = 0; l < iterations; ++l) {
    p.g_app.push_back(make_mlp({hidden, hidden, 1}, {1, 0}, rng));
    p.g_node.push_back(make_mlp({2 * hidden, hidden, hidden}, {1, 1}, rng));
  }
  return p;
}

AppParams zeros_like(const AppParams& p) {
  AppParams z;
  z.hidden = p.hidden;
  z.iterations = p.iterations;
  z.num_types = p.num_types;
  z.appearance_dim = p.appearance_dim;
  for (const auto& l : p.input_map) z.input_map.push_back(zeros_like(l));
  for (const auto& m : p.g_app) z.g_app.push_back(zeros_like(m));
  for (const auto& m : p.g_node) z.g_node.push_back(zeros_like(m));
  return z;
}

AppIterOut app_iterate(const Eigen::MatrixXd& nodes_prev, const std::vector<int>& types,
                       const PairList& pairs, const AppParams& params, int iteration,
                       AppIterTrace* trace) {
  if (iteration < 0 || iteration >= params.iterations) {
    throw std::invalid_argument("app_iterate: iteration " + std::to_string(iteration) +
                                " out of range [0, " + std::to_string(params.iterations) + ")");
  }
  if (nodes_prev.rows() != params.hidden) {
    throw ModelError("app_iterate: node feature dimension " +
                     std::to_string(nodes_prev.rows()) + " does not match hidden size " +
                     std::to_string(params.hidden));
  }
  const int n = pairs.num_nodes;
  const int count = pairs.count();
  const int h = params.hidden;

  // Pair scores from absolute feature differences; |a-b| = |b-a| makes the
  // result symmetric without any extra handling.
  Eigen::MatrixXd diff(h, count);
  Eigen::MatrixXd sgn(h, count);
  for (int e = 0; e < count; ++e) {
    Eigen::VectorXd d = nodes_prev.col(pairs.a[e]) - nodes_prev.col(pairs.b[e]);
    sgn.col(e) = d.array().sign();
    diff.col(e) = d.array().abs();
  }
  MlpTrace app_trace;
  Eigen::VectorXd logit =
      mlp_forward(params.g_app[iteration], diff, trace ? &app_trace : nullptr)
          .row(0)
          .transpose();
  if (!logit.allFinite()) {
    throw NumericError("appearance branch: non-finite affinity logits at iteration " +
                       std::to_string(iteration));
  }

  AppIterOut out;
  out.A.prob = Eigen::MatrixXd::Zero(n, n);
  out.A.logit = Eigen::MatrixXd::Zero(n, n);
  for (int e = 0; e < count; ++e) {
    const int m = pairs.a[e];
    const int k = pairs.b[e];
    out.A.logit(m, k) = out.A.logit(k, m) = logit[e];
    out.A.prob(m, k) = out.A.prob(k, m) = sigmoid(logit[e]);
  }

  // Node refresh with the freshly scored affinities.
  Eigen::MatrixXd atilde = normalize_rows_by_type(out.A.prob, types);
  Eigen::MatrixXd cat = Eigen::MatrixXd::Zero(2 * h, n);
  for (int e = 0; e < count; ++e) {
    const int m = pairs.a[e];
    const int k = pairs.b[e];
    cat.col(m).head(h).noalias() += atilde(m, k) * nodes_prev.col(k);
    cat.col(k).head(h).noalias() += atilde(k, m) * nodes_prev.col(m);
  }
  for (int m = 0; m < n; ++m) cat.col(m).tail(h) = nodes_prev.col(m);
  MlpTrace node_trace;
  out.nodes = mlp_forward(params.g_node[iteration], cat, trace ? &node_trace : nullptr);

  if (trace) {
    trace->nodes_prev = nodes_prev;
    trace->sgn = std::move(sgn);
    trace->app_mlp = std::move(app_trace);
    trace->logit = std::move(logit);
    trace->a_prev_prob = out.A.prob;
    trace->atilde = std::move(atilde);
    trace->node_mlp = std::move(node_trace);
  }
  return out;
}

AppResult app_forward(const DetectionGraph& graph, const AppParams& params,
                      AppTrace* trace) {
  AppResult result;
  if (graph.size() < 2) {
    result.single_node = true;
    return result;
  }
  const int n = graph.size();
  const int h = params.hidden;

  // Per-type affine projection of the raw appearance vectors.
  std::vector<std::vector<int>> buckets(params.num_types);
  for (int m = 0; m < n; ++m) {
    if (graph.types[m] >= params.num_types) {
      throw ModelError("app_forward: no input projection for type " +
                       std::to_string(graph.types[m]));
    }
    if (graph.nodes[m].appearance.size() != params.appearance_dim) {
      throw ModelError("app_forward: appearance dimension " +
                       std::to_string(graph.nodes[m].appearance.size()) +
                       " does not match model dimension " +
                       std::to_string(params.appearance_dim));
    }
    buckets[graph.types[m]].push_back(m);
  }
  Eigen::MatrixXd nodes0(h, n);
  for (size_t t = 0; t < buckets.size(); ++t) {
    const auto& cols = buckets[t];
    if (cols.empty()) continue;
    Eigen::MatrixXd x(params.appearance_dim, cols.size());
    for (size_t c = 0; c < cols.size(); ++c) x.col(c) = graph.nodes[cols[c]].appearance;
    Eigen::MatrixXd y = (params.input_map[t].W * x).colwise() + params.input_map[t].b;
    for (size_t c = 0; c < cols.size(); ++c) nodes0.col(cols[c]) = y.col(c);
    if (trace) {
      trace->input_cols.push_back(cols);
      trace->input_bucket_type.push_back(static_cast<int>(t));
      trace->input_batches.push_back(std::move(x));
    }
  }

  PairList pairs = make_pair_list(graph);
  if (trace) {
    trace->types = graph.types;
    trace->nodes0 = nodes0;
    trace->iters.resize(params.iterations);
  }
  Eigen::MatrixXd nodes = std::move(nodes0);
  for (int l = 0; l < params.iterations; ++l) {
    AppIterOut out = app_iterate(nodes, graph.types, pairs, params, l,
                                 trace ? &trace->iters[l] : nullptr);
    nodes = std::move(out.nodes);
    result.iters.push_back(std::move(out.A));
  }
  if (trace) trace->pairs = std::move(pairs);
  return result;
}

void app_backward(const AppParams& params, const AppTrace& trace,
                  const std::vector<Eigen::VectorXd>& d_logit_direct,
                  AppParams& grad) {
  const PairList& pairs = trace.pairs;
  const std::vector<int>& types = trace.types;
  const int n = pairs.num_nodes;
  const int count = pairs.count();
  const int h = params.hidden;

  // Gradient wrt the nodes produced by the iteration being processed. The
  // final iteration's refreshed nodes feed nothing downstream.
  Eigen::MatrixXd d_nodes = Eigen::MatrixXd::Zero(h, n);

  for (int l = params.iterations - 1; l >= 0; --l) {
    const AppIterTrace& it = trace.iters[l];

    // Node refresh backward.
    Eigen::MatrixXd d_cat = mlp_backward(params.g_node[l], it.node_mlp,
                                         std::move(d_nodes), grad.g_node[l]);
    Eigen::MatrixXd d_prev = d_cat.bottomRows(h);
    const auto d_agg = d_cat.topRows(h);

    Eigen::MatrixXd d_atilde = Eigen::MatrixXd::Zero(n, n);
    for (int e = 0; e < count; ++e) {
      const int m = pairs.a[e];
      const int k = pairs.b[e];
      d_atilde(m, k) = d_agg.col(m).dot(it.nodes_prev.col(k));
      d_atilde(k, m) = d_agg.col(k).dot(it.nodes_prev.col(m));
      d_prev.col(k).noalias() += it.atilde(m, k) * d_agg.col(m);
      d_prev.col(m).noalias() += it.atilde(k, m) * d_agg.col(k);
    }

    // Normalization backward into this iteration's affinity probabilities.
    Eigen::MatrixXd d_prob = Eigen::MatrixXd::Zero(n, n);
    const int max_type = *std::max_element(types.begin(), types.end());
    Eigen::VectorXd sums(max_type + 1), inner(max_type + 1);
    for (int m = 0; m < n; ++m) {
      sums.setZero();
      inner.setZero();
      for (int k = 0; k < n; ++k) {
        if (k == m) continue;
        sums[types[k]] += it.a_prev_prob(m, k);
        inner[types[k]] += d_atilde(m, k) * it.a_prev_prob(m, k);
      }
      for (int k = 0; k < n; ++k) {
        if (k == m) continue;
        const double s = sums[types[k]];
        if (s > 0.0) d_prob(m, k) = (d_atilde(m, k) - inner[types[k]] / s) / s;
      }
    }

    Eigen::VectorXd d_logit = d_logit_direct[l];
    for (int e = 0; e < count; ++e) {
      const int m = pairs.a[e];
      const int k = pairs.b[e];
      const double p = sigmoid(it.logit[e]);
      d_logit[e] += (d_prob(m, k) + d_prob(k, m)) * p * (1.0 - p);
    }

    // Pair scorer backward, then the absolute difference.
    Eigen::MatrixXd d_diff = mlp_backward(params.g_app[l], it.app_mlp,
                                          d_logit.transpose(), grad.g_app[l]);
    for (int e = 0; e < count; ++e) {
      const int m = pairs.a[e];
      const int k = pairs.b[e];
      Eigen::VectorXd d = d_diff.col(e).cwiseProduct(it.sgn.col(e));
      d_prev.col(m) += d;
      d_prev.col(k) -= d;
    }

    d_nodes = std::move(d_prev);
  }

  // Input projections.
  for (size_t bidx = 0; bidx < trace.input_cols.size(); ++bidx) {
    const auto& cols = trace.input_cols[bidx];
    const int t = trace.input_bucket_type[bidx];
    Eigen::MatrixXd dy(h, cols.size());
    for (size_t c = 0; c < cols.size(); ++c) dy.col(c) = d_nodes.col(cols[c]);
    grad.input_map[t].W.noalias() += dy * trace.input_batches[bidx].transpose();
    grad.input_map[t].b.noalias() += dy.rowwise().sum();
  }
}

FuseParams init_fuse_params(Rng& rng) {
  FuseParams p;
  p.h = make_mlp({2, 16, 64, 64, 16, 1}, {1, 1, 1, 1, 0}, rng);
  return p;
}

FuseParams zeros_like(const FuseParams& p) { return FuseParams{zeros_like(p.h)}; }

AffinityMatrix fuse(const Eigen::MatrixXd& geo_logit, const Eigen::MatrixXd& app_logit,
                    const FuseParams& params, FuseTrace* trace) {
  if (geo_logit.rows() != app_logit.rows() || geo_logit.cols() != app_logit.cols() ||
      geo_logit.rows() != geo_logit.cols()) {
    throw std::invalid_argument("fuse: logit matrices must be square and equally sized");
  }
  const int n = static_cast<int>(geo_logit.rows());
  const int count = n * (n - 1) / 2;
  Eigen::MatrixXd in(2, count);
  int e = 0;
  for (int m = 0; m < n; ++m) {
    for (int k = m + 1; k < n; ++k, ++e) {
      in(0, e) = geo_logit(m, k);
      in(1, e) = app_logit(m, k);
    }
  }
  MlpTrace local;
  Eigen::VectorXd logit =
      mlp_forward(params.h, in, trace ? &local : nullptr).row(0).transpose();
  if (!logit.allFinite()) {
    throw NumericError("fusion head: non-finite logits");
  }

  AffinityMatrix out;
  out.prob = Eigen::MatrixXd::Zero(n, n);
  out.logit = Eigen::MatrixXd::Zero(n, n);
  e = 0;
  for (int m = 0; m < n; ++m) {
    for (int k = m + 1; k < n; ++k, ++e) {
      out.logit(m, k) = out.logit(k, m) = logit[e];
      out.prob(m, k) = out.prob(k, m) = sigmoid(logit[e]);
    }
  }
  if (trace) {
    trace->mlp = std::move(local);
    trace->logit = std::move(logit);
  }
  return out;
}

void fuse_backward(const FuseParams& params, const FuseTrace& trace,
                   const Eigen::VectorXd& d_logit, FuseParams& grad,
                   Eigen::VectorXd& d_geo_logit, Eigen::VectorXd& d_app_logit) {
  Eigen::MatrixXd d_in =
      mlp_backward(params.h, trace.mlp, d_logit.transpose(), grad.h);
  d_geo_logit = d_in.row(0).transpose();
  d_app_logit = d_in.row(1).transpose();
}

LossBreakdown affinity_loss(const std::vector<AffinityMatrix>& geo_iters,
                            const std::vector<AffinityMatrix>& app_iters,
                            const AffinityMatrix* fused, const EdgeLabels& labels) {
  const int n = labels.size();
  LossBreakdown out;
  for (int m = 0; m < n; ++m) {
    for (int k = m + 1; k < n; ++k) {
      if (labels.mask(m, k) == 0) continue;
      const int y = labels.label(m, k);
      if (y != 0 && y != 1) {
        throw std::logic_error("affinity_loss: unmasked edge (" + std::to_string(m) +
                               ", " + std::to_string(k) + ") has no label");
      }
      if (fused) out.fuse += bce_with_logit(fused->logit(m, k), y);
      for (const auto& A : geo_iters) {
        out.geo += bce_with_logit(A.logit(m, k), y) / geo_iters.size();
      }
      for (const auto& A : app_iters) {
        out.app += bce_with_logit(A.logit(m, k), y) / app_iters.size();
      }
    }
  }
  out.total = out.geo + out.app + out.fuse;
  return out;
}

}  // namespace posegroup
