#include "posegroup/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "posegroup/errors.hpp"
#include "posegroup/eval.hpp"
#include "posegroup/gradcheck.hpp"
#include "posegroup/graph.hpp"
#include "posegroup/partition.hpp"
#include "posegroup/train.hpp"
#include "posegroup/viz.hpp"

namespace posegroup {

namespace {

namespace fs = std::filesystem;

std::string indexed(const char* stem, int i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%05d.%s", stem, i, ext);
  return buf;
}

Branch affinity_from_string(const std::string& s) {
  if (s == "fuse") return Branch::Full;
  return branch_from_string(s);
}

const AffinityMatrix& pick_affinity(const ModelForward& fwd, Branch which) {
  switch (which) {
    case Branch::Geo: return fwd.geo.iters.back();
    case Branch::App: return fwd.app.iters.back();
    default: return fwd.fused;
  }
}

struct SynthArgs {
  std::string config, out;
  int scenes = 10;
  uint64_t seed = 0;
  bool dump_labels = false;
};

int cmd_synth(const SynthArgs& a) {
  DatasetConfig data = a.config.empty() ? DatasetConfig{} : load_dataset_config(a.config);
  SkeletonSpec spec = skeleton_for_template(data.gen.skeleton);
  fs::create_directories(a.out);
  SceneStream stream(data.gen, data.noise, a.seed, 0);
  for (int i = 0; i < a.scenes; ++i) {
    auto item = stream.at(i);
    save_scene(item.scene, (fs::path(a.out) / indexed("scene", i, "json")).string());
    save_detections(item.dets,
                    (fs::path(a.out) / indexed("detections", i, "json")).string());
    if (a.dump_labels) {
      std::ofstream out(fs::path(a.out) / indexed("labels", i, "txt"));
      if (!item.dets.detections.empty()) {
        DetectionGraph graph = build_graph(item.dets);
        EdgeLabels labels = label_edges(
            graph, assign_detections(item.dets, item.scene, spec), item.scene);
        write_adjacency_dump(labels, out);
      }
    }
  }
  std::cout << "wrote " << a.scenes << " scenes to " << a.out << '\n';
  return 0;
}

struct TrainArgs {
  std::string config, out, history;
  int64_t seed = -1;
  int steps = 0;
};

int cmd_train(const TrainArgs& a) {
  TrainConfig cfg = load_train_config(a.config);
  if (a.seed >= 0) cfg.seed = static_cast<uint64_t>(a.seed);
  if (a.steps > 0) cfg.steps = a.steps;
  SkeletonSpec spec = skeleton_for_template(cfg.data.gen.skeleton);
  SceneStream stream(cfg.data.gen, cfg.data.noise, cfg.seed, 0);
  TrainResult result = train(stream, cfg, spec, &std::cout);
  save_checkpoint(result.params, a.out);
  std::cout << "checkpoint written to " << a.out << '\n';
  if (!a.history.empty()) {
    std::ofstream out(a.history, std::ios::binary);
    if (!out) throw ConfigError("cannot write loss history \"" + a.history + "\"");
    write_loss_history(result.history, out);
  }
  return 0;
}

struct GroupArgs {
  std::string checkpoint, detections, out, skeleton = "compact7", affinity = "fuse";
  int min_joints = 1;
  double tau = 0.5;
};

int cmd_group(const GroupArgs& a) {
  SkeletonSpec spec = resolve_skeleton(a.skeleton);
  ModelParams params = load_checkpoint(a.checkpoint, spec);
  DetectionSet dets = load_detections(a.detections);
  DetectionGraph graph = build_graph(dets);

  std::vector<PoseInstance> poses;
  if (graph.size() == 1) {
    PoseInstance pose;
    pose.joints[graph.types[0]] = graph.nodes[0].id;
    poses.push_back(std::move(pose));
  } else {
    ModelForward fwd = model_forward(graph, params, Branch::Full);
    poses = group_detections(pick_affinity(fwd, affinity_from_string(a.affinity)),
                             graph, a.tau);
  }
  std::erase_if(poses, [&](const PoseInstance& p) {
    return static_cast<int>(p.joints.size()) < a.min_joints;
  });
  save_poses(poses, graph, &spec, a.out);
  std::cout << "wrote " << poses.size() << " poses to " << a.out << '\n';
  return 0;
}

struct EvalArgs {
  std::string checkpoint, skeleton, config, out, data, affinity = "fuse";
  int scenes = 100;
  uint64_t seed = 0;
  double tau = 0.5;
  bool no_grouping = false;
};

int cmd_eval(const EvalArgs& a) {
  DatasetConfig data = a.config.empty() ? DatasetConfig{} : load_dataset_config(a.config);
  SkeletonSpec spec = a.skeleton.empty() ? skeleton_for_template(data.gen.skeleton)
                                         : resolve_skeleton(a.skeleton);
  ModelParams params = load_checkpoint(a.checkpoint, spec);
  EvalOptions opt;
  opt.scenes = a.scenes;
  opt.seed = a.seed;
  opt.tau = a.tau;
  opt.grouping_affinity = affinity_from_string(a.affinity);
  opt.with_grouping = !a.no_grouping;

  EvalReport report = a.data.empty() ? evaluate(params, spec, data, opt)
                                     : evaluate_files(params, spec, a.data, opt);
  if (a.out.empty()) {
    write_report(report, std::cout);
  } else {
    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw ConfigError("cannot write report \"" + a.out + "\"");
    write_report(report, out);
  }
  return 0;
}

struct GradcheckArgs {
  uint64_t seed = 1;
  int nodes = 8;
  int types = 4;
  int hidden = 256;
  int coords = 20;
  int probes = 5;
  double step = 1e-5;
  double tolerance = 1e-4;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  GradCheckOptions opt;
  opt.seed = a.seed;
  opt.num_nodes = a.nodes;
  opt.num_types = a.types;
  opt.model.hidden = a.hidden;
  opt.step = a.step;
  opt.tolerance = a.tolerance;
  opt.coords_per_group = a.coords;
  opt.probes_per_group = a.probes;
  GradCheckReport report = run_gradient_check(opt);
  print_gradcheck_report(report, std::cout);
  return report.pass ? 0 : 1;
}

struct VizArgs {
  std::string checkpoint, skeleton, detections, config, out, affinity = "fuse";
  uint64_t seed = 0;
  double tau = 0.5;
};

int cmd_export_viz(const VizArgs& a) {
  DatasetConfig data = a.config.empty() ? DatasetConfig{} : load_dataset_config(a.config);
  SkeletonSpec spec = a.skeleton.empty() ? skeleton_for_template(data.gen.skeleton)
                                         : resolve_skeleton(a.skeleton);
  ModelParams params = load_checkpoint(a.checkpoint, spec);

  DetectionSet dets;
  if (!a.detections.empty()) {
    dets = load_detections(a.detections);
  } else {
    SceneStream stream(data.gen, data.noise, a.seed, 0);
    dets = stream.at(0).dets;
  }
  if (dets.detections.size() < 2) {
    throw ConfigError("export-viz: need at least two detections");
  }
  DetectionGraph graph = build_graph(dets);
  ModelForward fwd = model_forward(graph, params, Branch::Full);
  export_viz(graph, pick_affinity(fwd, affinity_from_string(a.affinity)), a.tau, a.out);
  std::cout << "wrote " << a.out << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"keypoint grouping for bottom-up multi-person pose estimation"};
  app.require_subcommand(1);
  int rc = 0;

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate labeled scenes and detections");
  synth->add_option("--config", synth_args.config, "dataset config JSON");
  synth->add_option("--scenes", synth_args.scenes, "number of scenes");
  synth->add_option("--seed", synth_args.seed, "base seed");
  synth->add_option("--out", synth_args.out, "output directory")->required();
  synth->add_flag("--dump-labels", synth_args.dump_labels,
                  "also write edge-label adjacency dumps");
  synth->callback([&] { rc = cmd_synth(synth_args); });

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train a model on synthetic scenes");
  train->add_option("--config", train_args.config, "train config JSON")->required();
  train->add_option("--out", train_args.out, "output checkpoint path")->required();
  train->add_option("--history", train_args.history, "loss history CSV path");
  train->add_option("--seed", train_args.seed, "override config seed");
  train->add_option("--steps", train_args.steps, "override config steps");
  train->callback([&] { rc = cmd_train(train_args); });

  GroupArgs group_args;
  auto* group = app.add_subcommand("group", "group detections into poses");
  group->add_option("--checkpoint", group_args.checkpoint, "model checkpoint")->required();
  group->add_option("--detections", group_args.detections, "detections JSON")->required();
  group->add_option("--out", group_args.out, "output poses JSON")->required();
  group->add_option("--skeleton", group_args.skeleton, "skeleton name or config path");
  group->add_option("--affinity", group_args.affinity, "affinity used: fuse, geo, or app");
  group->add_option("--min-joints", group_args.min_joints, "drop poses with fewer joints");
  group->add_option("--tau", group_args.tau, "binarization threshold");
  group->callback([&] { rc = cmd_group(group_args); });

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", eval_args.checkpoint, "model checkpoint")->required();
  eval->add_option("--skeleton", eval_args.skeleton, "skeleton name or config path");
  eval->add_option("--config", eval_args.config, "dataset config JSON");
  eval->add_option("--scenes", eval_args.scenes, "held-out scene count");
  eval->add_option("--seed", eval_args.seed, "held-out seed");
  eval->add_option("--out", eval_args.out, "report path (default stdout)");
  eval->add_option("--data", eval_args.data, "directory of scene/detections files");
  eval->add_option("--affinity", eval_args.affinity, "affinity used for grouping");
  eval->add_option("--tau", eval_args.tau, "decision threshold");
  eval->add_flag("--no-grouping", eval_args.no_grouping, "skip grouping metrics");
  eval->callback([&] { rc = cmd_eval(eval_args); });

  GradcheckArgs gc_args;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gradcheck->add_option("--seed", gc_args.seed, "seed");
  gradcheck->add_option("--nodes", gc_args.nodes, "graph size");
  gradcheck->add_option("--types", gc_args.types, "joint types");
  gradcheck->add_option("--hidden", gc_args.hidden, "hidden width");
  gradcheck->add_option("--coords", gc_args.coords, "coordinates per group");
  gradcheck->add_option("--probes", gc_args.probes, "direction probes per group");
  gradcheck->add_option("--step", gc_args.step, "difference step");
  gradcheck->add_option("--tolerance", gc_args.tolerance, "relative error bound");
  gradcheck->callback([&] { rc = cmd_gradcheck(gc_args); });

  VizArgs viz_args;
  auto* viz = app.add_subcommand("export-viz", "render a graph with predicted edges");
  viz->add_option("--checkpoint", viz_args.checkpoint, "model checkpoint")->required();
  viz->add_option("--skeleton", viz_args.skeleton, "skeleton name or config path");
  viz->add_option("--detections", viz_args.detections, "detections JSON");
  viz->add_option("--config", viz_args.config, "dataset config JSON (to generate)");
  viz->add_option("--seed", viz_args.seed, "scene seed when generating");
  viz->add_option("--out", viz_args.out, "output SVG path")->required();
  viz->add_option("--affinity", viz_args.affinity, "matrix to draw: fuse, geo, or app");
  viz->add_option("--tau", viz_args.tau, "edge display threshold");
  viz->callback([&] { rc = cmd_export_viz(viz_args); });

  std::vector<const char*> argv;
  argv.push_back("posegroup");
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return rc;
}

}  // namespace posegroup
