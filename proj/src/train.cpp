#include "posegroup/train.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "posegroup/errors.hpp"
#include "posegroup/graph.hpp"

namespace posegroup {

namespace {

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace

TrainConfig train_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: invalid JSON: ") + e.what());
  }
  TrainConfig cfg;
  try {
    if (j.contains("data")) cfg.data = dataset_config_from_json(j.at("data").dump());
    read_key(j, "steps", cfg.steps);
    read_key(j, "learning_rate", cfg.learning_rate);
    read_key(j, "beta1", cfg.beta1);
    read_key(j, "beta2", cfg.beta2);
    read_key(j, "adam_eps", cfg.adam_eps);
    read_key(j, "seed", cfg.seed);
    if (j.contains("branch")) cfg.branch = branch_from_string(j.at("branch").get<std::string>());
    if (j.contains("model")) {
      const auto& m = j.at("model");
      read_key(m, "hidden", cfg.model.hidden);
      read_key(m, "geo_iterations", cfg.model.geo_iterations);
      read_key(m, "app_iterations", cfg.model.app_iterations);
    }
    read_key(j, "grad_accumulation", cfg.grad_accumulation);
    read_key(j, "eval_every", cfg.eval_every);
    read_key(j, "scenes_per_eval", cfg.scenes_per_eval);
    read_key(j, "log_every", cfg.log_every);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  if (cfg.steps < 1) throw ConfigError("train config: steps must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("train config: learning_rate must be positive");
  if (cfg.grad_accumulation < 1) throw ConfigError("train config: grad_accumulation must be >= 1");
  cfg.model.appearance_dim = cfg.data.noise.appearance_dim;
  return cfg;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("train config: cannot open \"" + path + "\"");
  std::stringstream ss;
  ss << in.rdbuf();
  return train_config_from_json(ss.str());
}

namespace {

// Per-iteration direct loss seeds: d(loss)/d(pair logit), zero on masked
// pairs (those pairs are skipped outright, never multiplied by zero).
Eigen::VectorXd direct_seed(const AffinityMatrix& a, const EdgeLabels& labels,
                            const PairList& pairs, double weight) {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(pairs.count());
  for (int e = 0; e < pairs.count(); ++e) {
    const int m = pairs.a[e];
    const int k = pairs.b[e];
    if (labels.mask(m, k) == 0) continue;
    d[e] = weight * (sigmoid(a.logit(m, k)) - labels.label(m, k));
  }
  return d;
}

}  // namespace

LossBreakdown compute_gradients(const ModelParams& params, const DetectionGraph& graph,
                                const EdgeLabels& labels, Branch branch,
                                ModelParams& grads) {
  if (graph.size() < 2) return {};
  if (labels.size() != graph.size()) {
    throw std::invalid_argument("compute_gradients: labels do not match the graph");
  }

  ModelTrace trace;
  ModelForward fwd = model_forward(graph, params, branch, &trace);

  const AffinityMatrix* fused = branch == Branch::Full ? &fwd.fused : nullptr;
  LossBreakdown loss = affinity_loss(fwd.geo.iters, fwd.app.iters, fused, labels);
  if (!std::isfinite(loss.total)) {
    throw NumericError("compute_gradients: non-finite loss");
  }

  const PairList* pairs = nullptr;
  if (branch == Branch::App) {
    pairs = &trace.app.pairs;
  } else {
    pairs = &trace.geo.emb.pairs;
  }

  std::vector<Eigen::VectorXd> d_geo(fwd.geo.iters.size());
  for (size_t l = 0; l < fwd.geo.iters.size(); ++l) {
    d_geo[l] = direct_seed(fwd.geo.iters[l], labels, *pairs, 1.0 / fwd.geo.iters.size());
  }
  std::vector<Eigen::VectorXd> d_app(fwd.app.iters.size());
  for (size_t l = 0; l < fwd.app.iters.size(); ++l) {
    d_app[l] = direct_seed(fwd.app.iters[l], labels, *pairs, 1.0 / fwd.app.iters.size());
  }

  if (branch == Branch::Full) {
    Eigen::VectorXd d_fuse = direct_seed(fwd.fused, labels, *pairs, 1.0);
    Eigen::VectorXd d_geo_in, d_app_in;
    fuse_backward(params.fuse, trace.fuse, d_fuse, grads.fuse, d_geo_in, d_app_in);
    d_geo.back() += d_geo_in;
    d_app.back() += d_app_in;
  }

  if (!d_geo.empty()) geo_backward(params.geo, trace.geo, d_geo, grads.geo);
  if (!d_app.empty()) app_backward(params.app, trace.app, d_app, grads.app);
  return loss;
}

std::optional<double> matrix_edge_accuracy(const AffinityMatrix& a,
                                           const EdgeLabels& labels, double tau) {
  const int n = labels.size();
  long correct = 0, total = 0;
  for (int m = 0; m < n; ++m) {
    for (int k = m + 1; k < n; ++k) {
      if (labels.mask(m, k) == 0) continue;
      ++total;
      const bool pred = a.prob(m, k) >= tau;
      if (pred == (labels.label(m, k) == 1)) ++correct;
    }
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(total);
}

namespace {

// Adam with bias correction, applied over the flat parameter enumeration.
class Adam {
 public:
  Adam(const TrainConfig& cfg, const std::vector<ParamView>& views) : cfg_(cfg) {
    m_.resize(views.size());
    v_.resize(views.size());
    for (size_t i = 0; i < views.size(); ++i) {
      m_[i] = Eigen::VectorXd::Zero(views[i].size());
      v_[i] = Eigen::VectorXd::Zero(views[i].size());
    }
  }

  void step(const std::vector<ParamView>& params, const std::vector<ParamView>& grads,
            const std::string& prefix) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (size_t i = 0; i < params.size(); ++i) {
      if (!prefix.empty() && params[i].name.rfind(prefix, 0) != 0) continue;
      Eigen::Map<Eigen::VectorXd> p(params[i].data, params[i].size());
      Eigen::Map<const Eigen::VectorXd> g(grads[i].data, grads[i].size());
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
      p.array() -= cfg_.learning_rate * (m_[i].array() / c1) /
                   ((v_[i].array() / c2).sqrt() + cfg_.adam_eps);
    }
  }

 private:
  TrainConfig cfg_;
  long t_ = 0;
  std::vector<Eigen::VectorXd> m_, v_;
};

void zero_params(const std::vector<ParamView>& views) {
  for (const auto& v : views) {
    std::fill(v.data, v.data + v.size(), 0.0);
  }
}

double heldout_accuracy(const ModelParams& params, const SceneStream& stream,
                        const SkeletonSpec& spec, Branch branch, int scenes) {
  long correct = 0, total = 0;
  for (int i = 0; i < scenes; ++i) {
    auto item = stream.at(i);
    if (item.dets.detections.size() < 2) continue;
    DetectionGraph graph = build_graph(item.dets);
    EdgeLabels labels = label_edges(graph, assign_detections(item.dets, item.scene, spec),
                                    item.scene);
    ModelForward fwd = model_forward(graph, params, branch);
    const AffinityMatrix& a = branch == Branch::Full ? fwd.fused
                              : branch == Branch::Geo ? fwd.geo.iters.back()
                                                      : fwd.app.iters.back();
    for (int m = 0; m < graph.size(); ++m) {
      for (int k = m + 1; k < graph.size(); ++k) {
        if (labels.mask(m, k) == 0) continue;
        ++total;
        if ((a.prob(m, k) >= 0.5) == (labels.label(m, k) == 1)) ++correct;
      }
    }
  }
  return total > 0 ? static_cast<double>(correct) / total : 0.0;
}

}  // namespace

TrainResult train(const SceneStream& stream, const TrainConfig& cfg,
                  const SkeletonSpec& spec, std::ostream* log) {
  ModelParams params = init_model(spec, cfg.model, derive_seed(cfg.seed, 0xD00D, 0));
  ModelParams grads = zeros_like(params);
  const auto param_views = list_params(params);
  const auto grad_views = list_params(grads);
  Adam adam(cfg, param_views);

  std::string prefix;
  if (cfg.branch == Branch::Geo) prefix = "geo.";
  if (cfg.branch == Branch::App) prefix = "app.";

  SceneStream heldout(stream.gen(), stream.noise(), cfg.seed, 0xE7A1);

  TrainResult result;
  result.history.reserve(cfg.steps);
  int item_index = 0;
  for (int step = 0; step < cfg.steps; ++step) {
    zero_params(grad_views);
    LossBreakdown loss;
    bool any_edges = false;
    try {
      for (int acc = 0; acc < cfg.grad_accumulation; ++acc) {
        auto item = stream.at(item_index++);
        if (item.dets.detections.empty()) continue;
        DetectionGraph graph = build_graph(item.dets);
        if (graph.size() < 2) continue;  // no edges, nothing to learn from
        any_edges = true;
        EdgeLabels labels = label_edges(
            graph, assign_detections(item.dets, item.scene, spec), item.scene);
        LossBreakdown one = compute_gradients(params, graph, labels, cfg.branch, grads);
        loss.total += one.total;
        loss.geo += one.geo;
        loss.app += one.app;
        loss.fuse += one.fuse;
      }
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (training step " +
                         std::to_string(step) + ", scene index " +
                         std::to_string(item_index - 1) + ", seed " +
                         std::to_string(cfg.seed) + ")");
    }
    if (cfg.grad_accumulation > 1) {
      const double s = 1.0 / cfg.grad_accumulation;
      for (const auto& v : grad_views) {
        Eigen::Map<Eigen::VectorXd>(v.data, v.size()) *= s;
      }
      loss.total /= cfg.grad_accumulation;
      loss.geo /= cfg.grad_accumulation;
      loss.app /= cfg.grad_accumulation;
      loss.fuse /= cfg.grad_accumulation;
    }
    if (any_edges) adam.step(param_views, grad_views, prefix);
    result.history.push_back({step, loss.total, loss.geo, loss.app, loss.fuse});

    if (log && cfg.log_every > 0 && (step % cfg.log_every == 0 || step + 1 == cfg.steps)) {
      (*log) << "step " << step << " loss " << std::setprecision(6) << loss.total;
      if (cfg.eval_every > 0 && step % cfg.eval_every == 0) {
        (*log) << " heldout_acc "
               << heldout_accuracy(params, heldout, spec, cfg.branch, cfg.scenes_per_eval);
      }
      (*log) << '\n';
    }
  }
  if (!all_params_finite(params)) {
    throw NumericError("train: non-finite weights after final step (seed " +
                       std::to_string(cfg.seed) + ")");
  }
  result.params = std::move(params);
  return result;
}

void write_loss_history(const std::vector<LossRow>& history, std::ostream& out) {
  out << "step,total,geo,app,fuse\n";
  out << std::setprecision(17);
  for (const auto& row : history) {
    out << row.step << ',' << row.total << ',' << row.geo << ',' << row.app << ','
        << row.fuse << '\n';
  }
}

}  // namespace posegroup
