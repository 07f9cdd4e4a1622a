#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "transpose/data/dataset.hpp"
#include "transpose/metrics.hpp"
#include "transpose/net/pose_net.hpp"
#include "transpose/train.hpp"

namespace transpose {

/// Everything a run depends on. The scene seed, network seed and training
/// seed all derive from `seed`. The block kind and the geometry-aware switch
/// live in `network` and double as the ablation axes.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string model = "Lbracket";
  data::SceneConfig scene;
  net::NetworkConfig network;
  train::TrainOptions training;

  /// Copies `seed` into the scene and training settings.
  void sync_seeds();
  /// Checks every section before any compute starts.
  void validate() const;
};

/// JSON document with the sections "seed", "model", "scene", "network"
/// ({"length_scale", "embed", "encoder", "head"}), "training". Unknown keys
/// are rejected; absent keys keep their defaults.
std::string to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_from_json(const std::string& text);

ExperimentConfig load_experiment(const std::filesystem::path& path);
void save_experiment(const std::filesystem::path& path, const ExperimentConfig& cfg);

inline constexpr const char* kCheckpointFile = "checkpoint.gpck";
inline constexpr const char* kConfigFile = "config.json";
inline constexpr const char* kLossLogFile = "loss.csv";

struct TrainedRun {
  std::unique_ptr<net::PoseNet> net;
  std::vector<train::LossRow> log;
  metrics::MetricReport val;
};

using ProgressFn = std::function<void(const train::LossRow&)>;

/// Trains `cfg` on the dataset's train split and writes checkpoint.gpck,
/// config.json, loss.csv and the validation report into `out_dir`. A
/// diverged run still leaves its partial loss log behind.
TrainedRun run_training(const ExperimentConfig& cfg, const data::Dataset& dataset, const std::filesystem::path& out_dir,
                        const ProgressFn& progress = {});

/// step,loss,wall_ms with losses at full precision.
std::string loss_log_csv(const std::vector<train::LossRow>& rows);

struct AblationCell {
  net::BlockKind block = net::BlockKind::gcn;
  bool geometry_aware = true;
  std::uint64_t seed = 0;
  metrics::MetricReport val;
};

/// The block x geometry-aware grid, in the order (plainconv, off),
/// (gcn, off), (plainconv, on), (gcn, on), repeated per seed. Each run goes
/// to `<out_dir>/<block>_geo-<on|off>_seed<seed>`.
std::vector<AblationCell> run_ablation(const ExperimentConfig& base, const data::Dataset& dataset,
                                       const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out_dir,
                                       const ProgressFn& progress = {});

/// One row per grid cell: "gcn,geometry_aware,<object>,mean" where the object
/// column is the seed-averaged validation ADD(-S)-0.1d.
std::string ablation_table(const std::vector<AblationCell>& cells);
/// One row per run: block,geometry_aware,seed,val_add_01d,val_adds_auc.
std::string ablation_runs_csv(const std::vector<AblationCell>& cells);

}  // namespace transpose
