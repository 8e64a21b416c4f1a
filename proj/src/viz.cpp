#include "posegroup/viz.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "posegroup/errors.hpp"

namespace posegroup {

namespace {

constexpr double kSize = 800.0;
constexpr double kMargin = 12.0;

// Fixed palette, cycled by joint type.
const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b",
                         "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8",
                         "#ffbb78", "#98df8a"};

double px(double v) { return kMargin + v * kSize; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

void export_viz(const DetectionGraph& graph, const AffinityMatrix& affinity,
                double tau, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("viz: cannot write \"" + path + "\"");

  const double extent = kSize + 2 * kMargin;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << extent
      << "\" height=\"" << extent << "\" viewBox=\"0 0 " << extent << ' ' << extent
      << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  const int n = graph.size();
  for (int m = 0; m < n; ++m) {
    for (int k = m + 1; k < n; ++k) {
      const double p = affinity.prob(m, k);
      if (p < tau) continue;
      out << "<line x1=\"" << fmt(px(graph.nodes[m].keypoint.x)) << "\" y1=\""
          << fmt(px(graph.nodes[m].keypoint.y)) << "\" x2=\""
          << fmt(px(graph.nodes[k].keypoint.x)) << "\" y2=\""
          << fmt(px(graph.nodes[k].keypoint.y))
          << "\" stroke=\"#d62728\" stroke-width=\"2\" stroke-opacity=\""
          << fmt(0.15 + 0.85 * p) << "\"/>\n";
    }
  }
  for (int m = 0; m < n; ++m) {
    const int t = graph.types[m];
    out << "<circle cx=\"" << fmt(px(graph.nodes[m].keypoint.x)) << "\" cy=\""
        << fmt(px(graph.nodes[m].keypoint.y)) << "\" r=\"6\" fill=\""
        << kColors[t % (sizeof(kColors) / sizeof(kColors[0]))]
        << "\" stroke=\"#333333\"/>\n";
  }
  out << "</svg>\n";

  nlohmann::json j;
  j["tau"] = tau;
  j["nodes"] = nlohmann::json::array();
  for (int m = 0; m < n; ++m) {
    j["nodes"].push_back({{"id", graph.nodes[m].id},
                          {"type", graph.types[m]},
                          {"x", graph.nodes[m].keypoint.x},
                          {"y", graph.nodes[m].keypoint.y}});
  }
  j["edges"] = nlohmann::json::array();
  for (int m = 0; m < n; ++m) {
    for (int k = m + 1; k < n; ++k) {
      j["edges"].push_back({{"a", graph.nodes[m].id},
                            {"b", graph.nodes[k].id},
                            {"score", affinity.prob(m, k)},
                            {"predicted", affinity.prob(m, k) >= tau}});
    }
  }
  std::ofstream side(path + ".json", std::ios::binary);
  if (!side) throw ConfigError("viz: cannot write \"" + path + ".json\"");
  side << j.dump(2) << '\n';
}

}  // namespace posegroup
