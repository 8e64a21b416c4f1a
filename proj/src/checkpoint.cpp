#include "posegroup/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "posegroup/errors.hpp"

namespace posegroup {

namespace {

constexpr char kMagic[8] = {'P', 'O', 'S', 'E', 'G', 'C', 'K', 'P'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) {
    throw CheckpointError(CheckpointError::Kind::Truncated, "truncated checkpoint file");
  }
  return v;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("checkpoint: cannot write \"" + path + "\"");
  out.write(kMagic, sizeof(kMagic));
  put(out, kVersion);
  put(out, params.skeleton_hash);
  const ModelConfig cfg = config_of(params);
  put<int32_t>(out, params.geo.num_types);
  put<int32_t>(out, cfg.hidden);
  put<int32_t>(out, cfg.geo_iterations);
  put<int32_t>(out, cfg.app_iterations);
  put<int32_t>(out, cfg.appearance_dim);

  const auto views = list_params(params);
  put<uint64_t>(out, views.size());
  for (const auto& v : views) {
    put<uint32_t>(out, static_cast<uint32_t>(v.name.size()));
    out.write(v.name.data(), static_cast<std::streamsize>(v.name.size()));
    put<uint64_t>(out, static_cast<uint64_t>(v.rows));
    put<uint64_t>(out, static_cast<uint64_t>(v.cols));
    out.write(reinterpret_cast<const char*>(v.data),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  if (!out) throw ConfigError("checkpoint: write to \"" + path + "\" failed");
}

ModelParams load_checkpoint(const std::string& path, const SkeletonSpec& spec) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("checkpoint: cannot open \"" + path + "\"");

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(CheckpointError::Kind::BadMagic,
                          "\"" + path + "\" is not a checkpoint file");
  }
  const auto version = take<uint32_t>(in);
  if (version != kVersion) {
    throw CheckpointError(CheckpointError::Kind::Version,
                          "unsupported checkpoint version " + std::to_string(version));
  }
  const auto hash = take<uint64_t>(in);
  if (hash != spec.content_hash()) {
    throw CheckpointError(CheckpointError::Kind::SkeletonHash,
                          "checkpoint was trained with a different skeleton config");
  }
  ModelConfig cfg;
  const auto num_types = take<int32_t>(in);
  cfg.hidden = take<int32_t>(in);
  cfg.geo_iterations = take<int32_t>(in);
  cfg.app_iterations = take<int32_t>(in);
  cfg.appearance_dim = take<int32_t>(in);
  if (num_types != spec.num_types()) {
    throw CheckpointError(CheckpointError::Kind::SkeletonHash,
                          "checkpoint joint-type count does not match the skeleton");
  }

  ModelParams params = init_model(spec, cfg, 0);
  auto views = list_params(params);

  const auto n_arrays = take<uint64_t>(in);
  if (n_arrays != views.size()) {
    throw CheckpointError(CheckpointError::Kind::Format,
                          "checkpoint holds " + std::to_string(n_arrays) +
                              " arrays, expected " + std::to_string(views.size()));
  }
  for (auto& v : views) {
    const auto name_len = take<uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) {
      throw CheckpointError(CheckpointError::Kind::Truncated, "truncated checkpoint file");
    }
    if (name != v.name) {
      throw CheckpointError(CheckpointError::Kind::Format,
                            "unexpected array \"" + name + "\" (wanted \"" + v.name + "\")");
    }
    const auto rows = take<uint64_t>(in);
    const auto cols = take<uint64_t>(in);
    if (rows != static_cast<uint64_t>(v.rows) || cols != static_cast<uint64_t>(v.cols)) {
      throw CheckpointError(CheckpointError::Kind::Format,
                            "array \"" + name + "\" has unexpected shape");
    }
    in.read(reinterpret_cast<char*>(v.data),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) {
      throw CheckpointError(CheckpointError::Kind::Truncated, "truncated checkpoint file");
    }
  }
  // Nothing may follow the last array.
  in.peek();
  if (!in.eof()) {
    throw CheckpointError(CheckpointError::Kind::Format,
                          "trailing bytes after checkpoint payload");
  }
  if (!all_params_finite(params)) {
    throw CheckpointError(CheckpointError::Kind::Format,
                          "checkpoint contains non-finite weights");
  }
  return params;
}

}  // namespace posegroup
