#include "posegroup/geonet.hpp"

#include <stdexcept>

#include "posegroup/errors.hpp"

namespace posegroup {

PairList make_pair_list(const DetectionGraph& graph) {
  const int n = graph.size();
  PairList out;
  out.num_nodes = n;
  out.index = Eigen::MatrixXi::Constant(n, n, -1);
  out.a.reserve(n * (n - 1) / 2);
  for (int m = 0; m < n; ++m) {
    for (int k = m + 1; k < n; ++k) {
      const int e = out.count();
      out.a.push_back(m);
      out.b.push_back(k);
      const auto& dm = graph.nodes[m];
      const auto& dk = graph.nodes[k];
      const bool a_first =
          dm.keypoint.type_index != dk.keypoint.type_index
              ? dm.keypoint.type_index < dk.keypoint.type_index
              : dm.id < dk.id;
      out.a_first.push_back(a_first ? 1 : 0);
      out.index(m, k) = out.index(k, m) = e;
    }
  }
  return out;
}

Eigen::MatrixXd normalize_rows_by_type(const Eigen::MatrixXd& a,
                                       const std::vector<int>& types) {
  const int n = static_cast<int>(a.rows());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  if (n == 0) return out;
  const int max_type = *std::max_element(types.begin(), types.end());
  Eigen::VectorXd sums(max_type + 1);
  for (int m = 0; m < n; ++m) {
    sums.setZero();
    for (int k = 0; k < n; ++k) {
      if (k == m) continue;
      sums[types[k]] += a(m, k);
    }
    for (int k = 0; k < n; ++k) {
      if (k == m) continue;
      const double s = sums[types[k]];
      if (s > 0.0) out(m, k) = a(m, k) / s;
    }
  }
  return out;
}

int GeoParams::pair_index(int ja, int jb) const {
  const int lo = std::min(ja, jb);
  const int hi = std::max(ja, jb);
  return hi * (hi + 1) / 2 + lo;
}

GeoParams init_geo_params(int num_types, int hidden, int iterations, Rng& rng) {
  GeoParams p;
  p.hidden = hidden;
  p.iterations = iterations;
  p.num_types = num_types;
  for (int i = 0; i < p.num_type_pairs(); ++i) {
    p.f_edge.push_back(make_mlp({2, hidden, hidden}, {1, 1}, rng));
  }
  p.f_node.resize(iterations);
  p.f_geo.reserve(iterations);
  for (int l = 0; l < iterations; ++l) {
    for (int j = 0; j < num_types; ++j) {
      p.f_node[l].push_back(make_mlp({hidden, hidden, hidden}, {1, 1}, rng));
    }
    p.f_geo.push_back(make_mlp({3 * hidden, hidden, 1}, {1, 0}, rng));
  }
  return p;
}

GeoParams zeros_like(const GeoParams& p) {
  GeoParams z;
  z.hidden = p.hidden;
  z.iterations = p.iterations;
  z.num_types = p.num_types;
  for (const auto& m : p.f_edge) z.f_edge.push_back(zeros_like(m));
  z.f_node.resize(p.f_node.size());
  for (size_t l = 0; l < p.f_node.size(); ++l) {
    for (const auto& m : p.f_node[l]) z.f_node[l].push_back(zeros_like(m));
  }
  for (const auto& m : p.f_geo) z.f_geo.push_back(zeros_like(m));
  return z;
}

EdgeEmbeddings embed_edges(const DetectionGraph& graph, const GeoParams& params,
                           EdgeEmbedTrace* trace) {
  EdgeEmbeddings out;
  out.pairs = make_pair_list(graph);
  const int count = out.pairs.count();
  out.emb.resize(params.hidden, count);

  // Bucket pairs by unordered type pair so each encoder runs once, batched.
  std::vector<std::vector<int>> buckets(params.num_type_pairs());
  for (int e = 0; e < count; ++e) {
    const int ta = graph.types[out.pairs.a[e]];
    const int tb = graph.types[out.pairs.b[e]];
    if (ta >= params.num_types || tb >= params.num_types) {
      throw ModelError("embed_edges: no encoder for type pair (" + std::to_string(ta) +
                       ", " + std::to_string(tb) + ")");
    }
    buckets[params.pair_index(ta, tb)].push_back(e);
  }

  if (trace) {
    trace->cols.clear();
    trace->bucket_pair.clear();
    trace->mlp.clear();
  }
  for (size_t pi = 0; pi < buckets.size(); ++pi) {
    const auto& cols = buckets[pi];
    if (cols.empty()) continue;
    Eigen::MatrixXd disp(2, cols.size());
    for (size_t c = 0; c < cols.size(); ++c) {
      const int e = cols[c];
      // Displacement is taken tail - head in canonical order.
      const int tail = out.pairs.a_first[e] ? out.pairs.a[e] : out.pairs.b[e];
      const int head = out.pairs.a_first[e] ? out.pairs.b[e] : out.pairs.a[e];
      disp(0, c) = graph.nodes[tail].keypoint.x - graph.nodes[head].keypoint.x;
      disp(1, c) = graph.nodes[tail].keypoint.y - graph.nodes[head].keypoint.y;
    }
    MlpTrace local;
    Eigen::MatrixXd enc = mlp_forward(params.f_edge[pi], disp, trace ? &local : nullptr);
    for (size_t c = 0; c < cols.size(); ++c) out.emb.col(cols[c]) = enc.col(c);
    if (trace) {
      trace->cols.push_back(cols);
      trace->bucket_pair.push_back(static_cast<int>(pi));
      trace->mlp.push_back(std::move(local));
    }
  }
  return out;
}

namespace {

// Batched per-type application of f_node (or any per-type MLP family).
Eigen::MatrixXd apply_per_type(const std::vector<Mlp>& mlps, const std::vector<int>& types,
                               const Eigen::MatrixXd& input,
                               std::vector<std::vector<int>>* cols_out,
                               std::vector<MlpTrace>* traces_out) {
  const int n = static_cast<int>(input.cols());
  Eigen::MatrixXd out(mlps.front().out_dim(), n);
  std::vector<std::vector<int>> buckets(mlps.size());
  for (int m = 0; m < n; ++m) buckets[types[m]].push_back(m);
  for (size_t t = 0; t < buckets.size(); ++t) {
    const auto& cols = buckets[t];
    if (cols.empty()) continue;
    Eigen::MatrixXd x(input.rows(), cols.size());
    for (size_t c = 0; c < cols.size(); ++c) x.col(c) = input.col(cols[c]);
    MlpTrace local;
    Eigen::MatrixXd y = mlp_forward(mlps[t], x, traces_out ? &local : nullptr);
    for (size_t c = 0; c < cols.size(); ++c) out.col(cols[c]) = y.col(c);
    if (cols_out) cols_out->push_back(cols);
    if (traces_out) traces_out->push_back(std::move(local));
  }
  return out;
}

}  // namespace

GeoIterOut geo_iterate(const std::vector<int>& types, const EdgeEmbeddings& emb,
                       const Eigen::MatrixXd& a_prev, const GeoParams& params,
                       int iteration, GeoIterTrace* trace) {
  if (iteration < 0 || iteration >= params.iterations) {
    throw std::invalid_argument("geo_iterate: iteration " + std::to_string(iteration) +
                                " out of range [0, " + std::to_string(params.iterations) + ")");
  }
  const PairList& pairs = emb.pairs;
  const int n = pairs.num_nodes;
  const int count = pairs.count();
  const int h = params.hidden;

  Eigen::MatrixXd atilde = normalize_rows_by_type(a_prev, types);

  // Aggregate incoming edge encodings per node.
  Eigen::MatrixXd agg = Eigen::MatrixXd::Zero(h, n);
  for (int e = 0; e < count; ++e) {
    const int m = pairs.a[e];
    const int k = pairs.b[e];
    agg.col(m).noalias() += atilde(m, k) * emb.emb.col(e);
    agg.col(k).noalias() += atilde(k, m) * emb.emb.col(e);
  }

  GeoIterOut out;
  out.nodes = apply_per_type(params.f_node[iteration], types, agg,
                             trace ? &trace->node_cols : nullptr,
                             trace ? &trace->node_mlp : nullptr);

  // Affinity head. Its first layer is linear in [node_m, node_n, edge], so
  // the three column blocks are applied separately: per-node products are
  // computed once instead of once per incident edge.
  const Mlp& head = params.f_geo[iteration];
  const auto wa = head.layers[0].W.leftCols(h);
  const auto wb = head.layers[0].W.middleCols(h, h);
  const auto wc = head.layers[0].W.rightCols(h);
  const Eigen::VectorXd& b1 = head.layers[0].b;
  const Eigen::RowVectorXd w2 = head.layers[1].W.row(0);
  const double b2 = head.layers[1].b[0];

  Eigen::MatrixXd ha = wa * out.nodes;
  Eigen::MatrixXd hb = wb * out.nodes;
  Eigen::MatrixXd z_fwd = wc * emb.emb;  // reused for both directions below
  Eigen::MatrixXd z_rev = z_fwd;
  for (int e = 0; e < count; ++e) {
    const int m = pairs.a[e];
    const int k = pairs.b[e];
    z_fwd.col(e) += ha.col(m) + hb.col(k) + b1;
    z_rev.col(e) += ha.col(k) + hb.col(m) + b1;
  }
  z_fwd = z_fwd.cwiseMax(0.0);
  z_rev = z_rev.cwiseMax(0.0);
  Eigen::VectorXd logit =
      (0.5 * (w2 * z_fwd + w2 * z_rev)).transpose().array() + b2;
  if (!logit.allFinite()) {
    throw NumericError("geometry branch: non-finite affinity logits at iteration " +
                       std::to_string(iteration));
  }

  out.A.prob = Eigen::MatrixXd::Zero(n, n);
  out.A.logit = Eigen::MatrixXd::Zero(n, n);
  for (int e = 0; e < count; ++e) {
    const int m = pairs.a[e];
    const int k = pairs.b[e];
    out.A.logit(m, k) = out.A.logit(k, m) = logit[e];
    out.A.prob(m, k) = out.A.prob(k, m) = sigmoid(logit[e]);
  }

  if (trace) {
    trace->a_prev = a_prev;
    trace->atilde = std::move(atilde);
    trace->agg = std::move(agg);
    trace->nodes = out.nodes;
    trace->z_fwd = std::move(z_fwd);
    trace->z_rev = std::move(z_rev);
    trace->logit = std::move(logit);
  }
  return out;
}

GeoResult geo_forward(const DetectionGraph& graph, const GeoParams& params,
                      GeoTrace* trace) {
  GeoResult result;
  if (graph.size() < 2) {
    result.single_node = true;
    return result;
  }
  EdgeEmbeddings emb = embed_edges(graph, params, trace ? &trace->emb_trace : nullptr);
  const int n = graph.size();
  Eigen::MatrixXd a_prev = Eigen::MatrixXd::Ones(n, n);
  if (trace) {
    trace->types = graph.types;
    trace->iters.resize(params.iterations);
  }
  for (int l = 0; l < params.iterations; ++l) {
    GeoIterOut out = geo_iterate(graph.types, emb, a_prev, params, l,
                                 trace ? &trace->iters[l] : nullptr);
    a_prev = out.A.prob;
    result.iters.push_back(std::move(out.A));
  }
  if (trace) trace->emb = std::move(emb);
  return result;
}

void geo_backward(const GeoParams& params, const GeoTrace& trace,
                  const std::vector<Eigen::VectorXd>& d_logit_direct,
                  GeoParams& grad) {
  const PairList& pairs = trace.emb.pairs;
  const std::vector<int>& types = trace.types;
  const int n = pairs.num_nodes;
  const int count = pairs.count();
  const int h = params.hidden;

  Eigen::MatrixXd d_emb = Eigen::MatrixXd::Zero(h, count);
  Eigen::MatrixXd d_prob_next;  // dL/d(A_prob of the iteration being processed)

  for (int l = params.iterations - 1; l >= 0; --l) {
    const GeoIterTrace& it = trace.iters[l];

    Eigen::VectorXd d_logit = d_logit_direct[l];
    if (d_prob_next.size() > 0) {
      for (int e = 0; e < count; ++e) {
        const int m = pairs.a[e];
        const int k = pairs.b[e];
        const double p = sigmoid(it.logit[e]);
        d_logit[e] += (d_prob_next(m, k) + d_prob_next(k, m)) * p * (1.0 - p);
      }
    }

    // Affinity head, using the same block structure as the forward pass.
    const Mlp& head = params.f_geo[l];
    const auto wa = head.layers[0].W.leftCols(h);
    const auto wb = head.layers[0].W.middleCols(h, h);
    const auto wc = head.layers[0].W.rightCols(h);
    const Eigen::RowVectorXd w2 = head.layers[1].W.row(0);
    Mlp& ghead = grad.f_geo[l];

    const Eigen::RowVectorXd d_dir = (0.5 * d_logit).transpose();
    ghead.layers[1].b[0] += d_logit.sum();
    ghead.layers[1].W.row(0).noalias() +=
        ((it.z_fwd + it.z_rev) * d_dir.transpose()).transpose();

    Eigen::MatrixXd dz_fwd = w2.transpose() * d_dir;
    Eigen::MatrixXd dz_rev = dz_fwd;
    dz_fwd = (it.z_fwd.array() > 0.0).select(dz_fwd, 0.0);
    dz_rev = (it.z_rev.array() > 0.0).select(dz_rev, 0.0);

    Eigen::MatrixXd d_ha = Eigen::MatrixXd::Zero(h, n);
    Eigen::MatrixXd d_hb = Eigen::MatrixXd::Zero(h, n);
    for (int e = 0; e < count; ++e) {
      const int m = pairs.a[e];
      const int k = pairs.b[e];
      d_ha.col(m) += dz_fwd.col(e);
      d_hb.col(k) += dz_fwd.col(e);
      d_ha.col(k) += dz_rev.col(e);
      d_hb.col(m) += dz_rev.col(e);
    }
    Eigen::MatrixXd dc = dz_fwd + dz_rev;
    ghead.layers[0].b.noalias() += dc.rowwise().sum();
    ghead.layers[0].W.leftCols(h).noalias() += d_ha * it.nodes.transpose();
    ghead.layers[0].W.middleCols(h, h).noalias() += d_hb * it.nodes.transpose();
    ghead.layers[0].W.rightCols(h).noalias() += dc * trace.emb.emb.transpose();
    d_emb.noalias() += wc.transpose() * dc;

    Eigen::MatrixXd d_nodes = wa.transpose() * d_ha + wb.transpose() * d_hb;

    // Node encoders, per type.
    Eigen::MatrixXd d_agg(h, n);
    for (size_t bidx = 0; bidx < it.node_cols.size(); ++bidx) {
      const auto& cols = it.node_cols[bidx];
      const int t = types[cols.front()];
      Eigen::MatrixXd dy(h, cols.size());
      for (size_t c = 0; c < cols.size(); ++c) dy.col(c) = d_nodes.col(cols[c]);
      Eigen::MatrixXd dx = mlp_backward(params.f_node[l][t], it.node_mlp[bidx],
                                        std::move(dy), grad.f_node[l][t]);
      for (size_t c = 0; c < cols.size(); ++c) d_agg.col(cols[c]) = dx.col(c);
    }

    // Aggregation: agg_m = sum_k atilde(m,k) emb(m,k).
    Eigen::MatrixXd d_atilde = Eigen::MatrixXd::Zero(n, n);
    for (int e = 0; e < count; ++e) {
      const int m = pairs.a[e];
      const int k = pairs.b[e];
      d_atilde(m, k) = d_agg.col(m).dot(trace.emb.emb.col(e));
      d_atilde(k, m) = d_agg.col(k).dot(trace.emb.emb.col(e));
      d_emb.col(e).noalias() +=
          it.atilde(m, k) * d_agg.col(m) + it.atilde(k, m) * d_agg.col(k);
    }

    // Per-type L1 normalization (quotient rule per row and group).
    if (l > 0) {
      Eigen::MatrixXd d_prob = Eigen::MatrixXd::Zero(n, n);
      const int max_type = *std::max_element(types.begin(), types.end());
      Eigen::VectorXd sums(max_type + 1), inner(max_type + 1);
      for (int m = 0; m < n; ++m) {
        sums.setZero();
        inner.setZero();
        for (int k = 0; k < n; ++k) {
          if (k == m) continue;
          sums[types[k]] += it.a_prev(m, k);
          inner[types[k]] += d_atilde(m, k) * it.a_prev(m, k);
        }
        for (int k = 0; k < n; ++k) {
          if (k == m) continue;
          const double s = sums[types[k]];
          if (s > 0.0) {
            d_prob(m, k) = (d_atilde(m, k) - inner[types[k]] / s) / s;
          }
        }
      }
      d_prob_next = std::move(d_prob);
    }
    // l == 0 reads the constant all-ones prior; nothing flows further back.
  }

  // Edge encoders.
  for (size_t bidx = 0; bidx < trace.emb_trace.cols.size(); ++bidx) {
    const auto& cols = trace.emb_trace.cols[bidx];
    const int pi = trace.emb_trace.bucket_pair[bidx];
    Eigen::MatrixXd dy(h, cols.size());
    for (size_t c = 0; c < cols.size(); ++c) dy.col(c) = d_emb.col(cols[c]);
    mlp_backward(params.f_edge[pi], trace.emb_trace.mlp[bidx], std::move(dy),
                 grad.f_edge[pi]);
  }
}

}  // namespace posegroup
