#include "transpose/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <json.hpp>
#include <optional>
#include <random>
#include <sstream>

#include "transpose/errors.hpp"
#include "transpose/geometry_io.hpp"
#include "transpose/util/atomic_file.hpp"
#include "transpose/util/rng.hpp"

namespace transpose::data {

namespace {

using geom::Vec3;
using nlohmann::json;

/// Points not flagged in `drop`, in their original order.
geom::PointCloud keep_unflagged(const geom::PointCloud& pc, const std::vector<bool>& drop) {
  geom::PointCloud out;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    if (!drop[i]) out.points.push_back(pc[i]);
  }
  return out;
}

/// Flags the `count` entries with the largest key; among equal keys the lower
/// index is flagged first.
std::vector<bool> flag_largest(const std::vector<double>& key, std::size_t count) {
  std::vector<std::size_t> order(key.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&key](std::size_t a, std::size_t b) { return key[a] > key[b]; });
  std::vector<bool> flags(key.size(), false);
  for (std::size_t i = 0; i < count && i < order.size(); ++i) flags[order[i]] = true;
  return flags;
}

std::optional<Sample> try_sample(const ObjectModel& model, const SceneConfig& cfg, std::size_t index, int attempt) {
  std::mt19937_64 rng(util::mix_seed(cfg.seed, index, static_cast<std::uint64_t>(attempt)));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Sample s;
  s.model = model.name;
  const Eigen::Vector4d raw(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
  s.gt.R = geom::quat_to_rot(geom::normalize_quat(raw));
  for (int c = 0; c < 3; ++c) {
    s.gt.t[c] = cfg.translation_min[c] + unit(rng) * (cfg.translation_max[c] - cfg.translation_min[c]);
  }
  geom::PointCloud pc = geom::apply_transform(s.gt, model.vertices);

  const Vec3 view = Vec3(gauss(rng), gauss(rng), gauss(rng)).normalized();
  if (cfg.cull_fraction > 0.0) {
    const Vec3 center = geom::barycenter(pc);
    std::vector<double> depth(pc.size());
    for (std::size_t i = 0; i < pc.size(); ++i) depth[i] = (pc[i] - center).dot(view);
    const auto n_cull = static_cast<std::size_t>(std::floor(cfg.cull_fraction * static_cast<double>(pc.size())));
    pc = keep_unflagged(pc, flag_largest(depth, n_cull));
  }
  if (cfg.occluder_fraction > 0.0 && !pc.empty()) {
    const Vec3 center = pc[static_cast<std::size_t>(unit(rng) * static_cast<double>(pc.size())) % pc.size()];
    std::vector<double> closeness(pc.size());
    for (std::size_t i = 0; i < pc.size(); ++i) closeness[i] = -(pc[i] - center).squaredNorm();
    const auto n_occ =
        static_cast<std::size_t>(std::floor(cfg.occluder_fraction * static_cast<double>(pc.size())));
    pc = keep_unflagged(pc, flag_largest(closeness, n_occ));
  }
  if (pc.size() < kMinSurvivors) return std::nullopt;
  if (cfg.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    for (Vec3& p : pc.points) p += Vec3(noise(rng), noise(rng), noise(rng));
  }
  if (cfg.max_points != 0 && pc.size() > cfg.max_points) pc = geom::select(pc, geom::fps(pc, cfg.max_points, 0));
  s.normals = camera_normals(pc, cfg.normal_neighbors);
  s.cloud = std::move(pc);
  return s;
}

std::string sample_id(std::size_t index) {
  std::ostringstream ss;
  ss << std::setw(6) << std::setfill('0') << index;
  return ss.str();
}

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw DataError("dataset " + where + ": " + what);
}

template <typename T>
T field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) fail(where, std::string("missing field '") + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail(where, std::string("field '") + key + "' has the wrong type");
  }
}

IndexRange parse_range(const json& splits, const char* name) {
  const auto r = field<std::vector<std::size_t>>(splits, name, "manifest splits");
  if (r.size() != 2 || r[0] > r[1]) fail("manifest", std::string("split '") + name + "' must be [lo, hi) with lo <= hi");
  return {r[0], r[1]};
}

}  // namespace

void SceneConfig::validate() const {
  if (total_samples() == 0) throw ConfigError("scene: at least one sample is required");
  if (!(noise_sigma >= 0.0)) throw ConfigError("scene: noise_sigma must be >= 0");
  if (!(cull_fraction >= 0.0 && cull_fraction < 1.0)) throw ConfigError("scene: cull_fraction must lie in [0, 1)");
  if (!(occluder_fraction >= 0.0 && occluder_fraction < 1.0)) {
    throw ConfigError("scene: occluder_fraction must lie in [0, 1)");
  }
  if (!(translation_min.array() <= translation_max.array()).all()) {
    throw ConfigError("scene: translation_min must not exceed translation_max");
  }
  if (translation_min.z() <= 0.0) throw ConfigError("scene: objects must lie in front of the camera (z > 0)");
  if (max_points != 0 && max_points < kMinSurvivors) {
    throw ConfigError("scene: max_points must be 0 or at least " + std::to_string(kMinSurvivors));
  }
  if (normal_neighbors < 3 || normal_neighbors >= kMinSurvivors) {
    throw ConfigError("scene: normal_neighbors must lie in [3, " + std::to_string(kMinSurvivors) + ")");
  }
}

Sample gen_sample(const ObjectModel& model, const SceneConfig& cfg, std::size_t index) {
  cfg.validate();
  for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
    if (auto s = try_sample(model, cfg, index, attempt)) {
      s->id = sample_id(index);
      return std::move(*s);
    }
  }
  throw DataError("sample " + std::to_string(index) + ": fewer than " + std::to_string(kMinSurvivors) +
                  " points survived after " + std::to_string(kMaxRetries) + " retries");
}

geom::NormalField camera_normals(const geom::PointCloud& cloud, std::size_t k) {
  return geom::estimate_normals(cloud, std::min(k, cloud.size() - 1), Vec3::Zero());
}

std::pair<geom::PointCloud, geom::NormalField> preprocess(const geom::DepthImage& depth, const geom::Mask& mask,
                                                          const geom::CameraIntrinsics& K, std::size_t max_points,
                                                          std::size_t normal_neighbors) {
  return prepare_cloud(geom::backproject(depth, mask, K), max_points, normal_neighbors);
}

std::pair<geom::PointCloud, geom::NormalField> prepare_cloud(geom::PointCloud pc, std::size_t max_points,
                                                             std::size_t normal_neighbors) {
  if (max_points != 0 && pc.size() > max_points) pc = geom::select(pc, geom::fps(pc, max_points, 0));
  if (pc.size() < 4) throw GeometryError("preprocess: too few points for normal estimation");
  geom::NormalField normals = camera_normals(pc, normal_neighbors);
  return {std::move(pc), std::move(normals)};
}

std::vector<const Sample*> Dataset::split(const std::string& name) const {
  IndexRange range;
  if (name == "train") {
    range = train;
  } else if (name == "val") {
    range = val;
  } else if (name == "all") {
    range = {0, samples.size()};
  } else {
    throw ConfigError("unknown split '" + name + "' (expected train, val or all)");
  }
  std::vector<const Sample*> out;
  for (std::size_t i = range.begin; i < range.end; ++i) out.push_back(&samples.at(i));
  return out;
}

Dataset generate_dataset(const ObjectModel& model, const SceneConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.model = model;
  ds.train = {0, cfg.train_samples};
  ds.val = {cfg.train_samples, cfg.total_samples()};
  ds.samples.reserve(cfg.total_samples());
  for (std::size_t i = 0; i < cfg.total_samples(); ++i) ds.samples.push_back(gen_sample(model, cfg, i));
  return ds;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  json samples = json::array();
  for (const Sample& s : dataset.samples) {
    const std::string rel = "clouds/" + s.id + ".ply";
    geom::write_ply(dir / rel, s.cloud, &s.normals);
    const geom::UnitQuaternion q = geom::rot_to_quat(s.gt.R);
    json R = json::array();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) R.push_back(s.gt.R(r, c));
    }
    samples.push_back({{"id", s.id},
                       {"cloud_ply", rel},
                       {"q", {q[0], q[1], q[2], q[3]}},
                       {"R", R},
                       {"t", {s.gt.t.x(), s.gt.t.y(), s.gt.t.z()}}});
  }
  const json manifest = {{"version", kManifestVersion},
                         {"model", dataset.model.name},
                         {"depth_scale", dataset.depth_scale},
                         {"symmetric", dataset.model.symmetric},
                         {"diameter_m", dataset.model.diameter},
                         {"splits",
                          {{"train", {dataset.train.begin, dataset.train.end}},
                           {"val", {dataset.val.begin, dataset.val.end}}}},
                         {"samples", samples}};
  util::write_text_atomically(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const std::filesystem::path manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw IoError("no manifest.json in '" + dir.string() + "'");
  json manifest;
  try {
    manifest = json::parse(util::read_text(manifest_path));
  } catch (const json::parse_error& e) {
    fail("manifest", std::string("invalid JSON: ") + e.what());
  }
  if (field<int>(manifest, "version", "manifest") != kManifestVersion) fail("manifest", "unsupported version");

  Dataset ds;
  try {
    ds.model = builtin_model(field<std::string>(manifest, "model", "manifest"));
  } catch (const ConfigError& e) {
    fail("manifest", e.what());
  }
  if (field<bool>(manifest, "symmetric", "manifest") != ds.model.symmetric) {
    fail("manifest", "symmetric flag disagrees with model '" + ds.model.name + "'");
  }
  if (std::abs(field<double>(manifest, "diameter_m", "manifest") - ds.model.diameter) > 1e-9) {
    fail("manifest", "diameter_m disagrees with model '" + ds.model.name + "'");
  }
  ds.depth_scale = field<double>(manifest, "depth_scale", "manifest");
  if (!(ds.depth_scale > 0.0)) fail("manifest", "depth_scale must be positive");

  const json splits = field<json>(manifest, "splits", "manifest");
  ds.train = parse_range(splits, "train");
  ds.val = parse_range(splits, "val");
  const json samples = field<json>(manifest, "samples", "manifest");
  if (!samples.is_array()) fail("manifest", "'samples' must be an array");
  const std::size_t n = samples.size();
  if (ds.train.end > n || ds.val.end > n) fail("manifest", "split range exceeds the sample count");
  if (ds.train.begin < ds.val.end && ds.val.begin < ds.train.end && ds.train.size() > 0 && ds.val.size() > 0) {
    fail("manifest", "train and val splits overlap");
  }

  std::size_t on_disk = 0;
  if (std::filesystem::is_directory(dir / "clouds")) {
    for (const auto& entry : std::filesystem::directory_iterator(dir / "clouds")) {
      if (entry.path().extension() == ".ply") ++on_disk;
    }
  }
  if (on_disk != n) {
    fail("manifest", "lists " + std::to_string(n) + " samples but clouds/ holds " + std::to_string(on_disk) +
                         " PLY files");
  }

  ds.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const json& js = samples[i];
    Sample s;
    s.model = ds.model.name;
    s.id = field<std::string>(js, "id", "sample #" + std::to_string(i));
    const std::string where = "sample '" + s.id + "'";
    const auto q = field<std::vector<double>>(js, "q", where);
    const auto R = field<std::vector<double>>(js, "R", where);
    const auto t = field<std::vector<double>>(js, "t", where);
    if (q.size() != 4 || R.size() != 9 || t.size() != 3) fail(where, "q, R, t need 4, 9 and 3 entries");
    const double qn = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    if (std::abs(qn - 1.0) > 1e-9) fail(where, "quaternion is not unit norm");
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) s.gt.R(r, c) = R[static_cast<std::size_t>(3 * r + c)];
    }
    s.gt.t = Vec3(t[0], t[1], t[2]);
    if (!s.gt.t.allFinite()) fail(where, "translation is not finite");
    if (!geom::is_rotation(s.gt.R, 1e-9)) fail(where, "R is not a proper rotation (det must be +1)");
    const geom::Mat3 from_q = geom::quat_to_rot(geom::UnitQuaternion{{q[0], q[1], q[2], q[3]}});
    if ((from_q - s.gt.R).cwiseAbs().maxCoeff() > 1e-9) fail(where, "q and R describe different rotations");

    const auto rel = field<std::string>(js, "cloud_ply", where);
    const auto path = dir / rel;
    if (!std::filesystem::exists(path)) fail(where, "missing cloud file '" + rel + "'");
    geom::PlyCloud ply;
    try {
      ply = geom::read_ply(path);
    } catch (const ParseError& e) {
      fail(where, rel + ": " + e.what());
    }
    if (ply.cloud.size() < kMinSurvivors) fail(where, "cloud has fewer than " + std::to_string(kMinSurvivors) + " points");
    if (!ply.normals) fail(where, "cloud has no normals");
    s.cloud = std::move(ply.cloud);
    s.normals = std::move(*ply.normals);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace transpose::data
