#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "transpose/geometry.hpp"
#include "transpose/object_model.hpp"

namespace transpose::data {

/// "Lbracket" (asymmetric), "eggboxoid" (symmetric), "mug-like".
std::vector<ObjectModel> builtin_models();
ObjectModel builtin_model(const std::string& name);

/// Synthetic partial views of one model.
struct SceneConfig {
  std::size_t train_samples = 256;
  std::size_t val_samples = 64;
  double noise_sigma = 0.002;
  /// Fraction of points removed from the far side along a random direction.
  double cull_fraction = 0.3;
  /// Fraction of the remaining points removed by a random spherical occluder.
  double occluder_fraction = 0.0;
  geom::Vec3 translation_min{-0.1, -0.1, 0.6};
  geom::Vec3 translation_max{0.1, 0.1, 1.0};
  /// Clouds larger than this are reduced by FPS; 0 keeps every point.
  std::size_t max_points = 256;
  std::size_t normal_neighbors = 10;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t total_samples() const { return train_samples + val_samples; }
};

inline constexpr std::size_t kMinSurvivors = 32;
inline constexpr int kMaxRetries = 10;

struct Sample {
  std::string id;
  geom::PointCloud cloud;  // camera frame
  geom::NormalField normals;
  geom::RigidTransform gt;  // object -> camera
  std::string model;
};

/// Uniform rotation (normalized Gaussian quaternion), translation uniform in
/// the configured box, far-side culling, spherical occlusion, Gaussian noise,
/// optional FPS reduction, then normals. Deterministic in (cfg.seed, index).
/// Throws DataError when fewer than 32 points survive after the retries.
Sample gen_sample(const ObjectModel& model, const SceneConfig& cfg, std::size_t index);

/// Normals for an observed cloud, oriented toward the camera origin.
geom::NormalField camera_normals(const geom::PointCloud& cloud, std::size_t k);

/// Depth + mask to an oriented cloud: backproject, FPS-reduce to max_points
/// (0 = no limit), estimate normals toward the camera.
std::pair<geom::PointCloud, geom::NormalField> preprocess(const geom::DepthImage& depth, const geom::Mask& mask,
                                                          const geom::CameraIntrinsics& K, std::size_t max_points,
                                                          std::size_t normal_neighbors = 10);

/// The cloud half of preprocess: FPS reduction and camera-facing normals.
std::pair<geom::PointCloud, geom::NormalField> prepare_cloud(geom::PointCloud pc, std::size_t max_points,
                                                             std::size_t normal_neighbors = 10);

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
};

struct Dataset {
  ObjectModel model;
  double depth_scale = 0.001;
  IndexRange train;
  IndexRange val;
  std::vector<Sample> samples;

  std::vector<const Sample*> split(const std::string& name) const;
};

inline constexpr int kManifestVersion = 1;

/// Generates train + val samples for `model`.
Dataset generate_dataset(const ObjectModel& model, const SceneConfig& cfg);

/// Writes <dir>/manifest.json and <dir>/clouds/<id>.ply (points + normals).
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);

/// Reads and validates a dataset written by save_dataset. Any violation
/// throws DataError naming the offending sample or field.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace transpose::data
