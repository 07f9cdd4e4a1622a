#include "transpose/experiment.hpp"

#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>

#include "transpose/errors.hpp"
#include "transpose/util/atomic_file.hpp"

namespace transpose {

using nlohmann::json;

namespace {

// Reads `key` into `out` when present, rejecting mistyped values.
template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

void require_known(const json& j, const std::string& section, std::set<std::string> keys) {
  if (!j.is_object()) throw ConfigError("config: '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) throw ConfigError("config: unknown key '" + key + "' in '" + section + "'");
  }
}

json vec3(const geom::Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

void read_vec3(const json& j, const char* key, geom::Vec3& out) {
  std::vector<double> v;
  read(j, key, v);
  if (!j.contains(key)) return;
  if (v.size() != 3) throw ConfigError(std::string("config: '") + key + "' needs 3 values");
  out = geom::Vec3(v[0], v[1], v[2]);
}

std::string pool_name(ad::PoolKind p) { return p == ad::PoolKind::max ? "max" : "mean"; }

ad::PoolKind parse_pool(const std::string& s) {
  if (s == "max") return ad::PoolKind::max;
  if (s == "mean") return ad::PoolKind::mean;
  throw ConfigError("config: pool must be 'max' or 'mean', got '" + s + "'");
}

std::string block_name(net::BlockKind b) { return b == net::BlockKind::gcn ? "gcn" : "plainconv"; }

net::BlockKind parse_block(const std::string& s) {
  if (s == "gcn") return net::BlockKind::gcn;
  if (s == "plainconv") return net::BlockKind::plainconv;
  throw ConfigError("config: block must be 'gcn' or 'plainconv', got '" + s + "'");
}

}  // namespace

void ExperimentConfig::sync_seeds() {
  scene.seed = seed;
  training.seed = seed;
}

void ExperimentConfig::validate() const {
  data::builtin_model(model);
  scene.validate();
  network.validate();
  training.validate();
}

std::string to_json(const ExperimentConfig& cfg) {
  const data::SceneConfig& s = cfg.scene;
  const net::EmbedConfig& e = cfg.network.embed;
  const net::EncoderConfig& enc = cfg.network.encoder;
  const train::TrainOptions& t = cfg.training;
  json j;
  j["seed"] = cfg.seed;
  j["model"] = cfg.model;
  j["scene"] = {{"train_samples", s.train_samples},     {"val_samples", s.val_samples},
                {"noise_sigma", s.noise_sigma},         {"cull_fraction", s.cull_fraction},
                {"occluder_fraction", s.occluder_fraction}, {"translation_min", vec3(s.translation_min)},
                {"translation_max", vec3(s.translation_max)}, {"max_points", s.max_points},
                {"normal_neighbors", s.normal_neighbors}};
  j["network"] = {{"length_scale", cfg.network.length_scale},
                  {"embed",
                   {{"initial_centers", e.initial_centers},
                    {"k_neighbors", e.k_neighbors},
                    {"widths", e.widths},
                    {"downsample", e.downsample},
                    {"d_in", e.d_in},
                    {"pool", pool_name(e.pool)},
                    {"block", block_name(e.block)},
                    {"include_self", e.include_self},
                    {"fps_seed", e.fps_seed}}},
                  {"encoder",
                   {{"layers", enc.layers},
                    {"heads", enc.heads},
                    {"d_model", enc.d_model},
                    {"k_feature", enc.k_feature},
                    {"ffn_multiplier", enc.ffn_multiplier},
                    {"geometry_aware", enc.geometry_aware}}},
                  {"head", {{"hidden0", cfg.network.head.hidden0}, {"hidden1", cfg.network.head.hidden1}}}};
  j["training"] = {{"steps", t.steps},
                   {"batch", t.batch},
                   {"lr", t.lr},
                   {"cosine_decay", t.cosine_decay},
                   {"rotation_augmentation", t.rotation_augmentation},
                   {"augmentation_max_angle", t.augmentation_max_angle}};
  return j.dump(2) + "\n";
}

ExperimentConfig experiment_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  require_known(j, "config", {"seed", "model", "scene", "network", "training"});
  read(j, "seed", cfg.seed);
  read(j, "model", cfg.model);
  if (j.contains("scene")) {
    const json& s = j["scene"];
    require_known(s, "scene",
                  {"train_samples", "val_samples", "noise_sigma", "cull_fraction", "occluder_fraction",
                   "translation_min", "translation_max", "max_points", "normal_neighbors"});
    read(s, "train_samples", cfg.scene.train_samples);
    read(s, "val_samples", cfg.scene.val_samples);
    read(s, "noise_sigma", cfg.scene.noise_sigma);
    read(s, "cull_fraction", cfg.scene.cull_fraction);
    read(s, "occluder_fraction", cfg.scene.occluder_fraction);
    read_vec3(s, "translation_min", cfg.scene.translation_min);
    read_vec3(s, "translation_max", cfg.scene.translation_max);
    read(s, "max_points", cfg.scene.max_points);
    read(s, "normal_neighbors", cfg.scene.normal_neighbors);
  }
  if (j.contains("network")) {
    const json& n = j["network"];
    require_known(n, "network", {"length_scale", "embed", "encoder", "head"});
    read(n, "length_scale", cfg.network.length_scale);
    if (n.contains("embed")) {
      const json& e = n["embed"];
      net::EmbedConfig& ec = cfg.network.embed;
      require_known(e, "network.embed",
                    {"initial_centers", "k_neighbors", "widths", "downsample", "d_in", "pool", "block",
                     "include_self", "fps_seed"});
      read(e, "initial_centers", ec.initial_centers);
      read(e, "k_neighbors", ec.k_neighbors);
      read(e, "widths", ec.widths);
      read(e, "downsample", ec.downsample);
      read(e, "d_in", ec.d_in);
      std::string pool = pool_name(ec.pool), block = block_name(ec.block);
      read(e, "pool", pool);
      read(e, "block", block);
      ec.pool = parse_pool(pool);
      ec.block = parse_block(block);
      read(e, "include_self", ec.include_self);
      read(e, "fps_seed", ec.fps_seed);
    }
    if (n.contains("encoder")) {
      const json& e = n["encoder"];
      net::EncoderConfig& ec = cfg.network.encoder;
      require_known(e, "network.encoder", {"layers", "heads", "d_model", "k_feature", "ffn_multiplier", "geometry_aware"});
      read(e, "layers", ec.layers);
      read(e, "heads", ec.heads);
      read(e, "d_model", ec.d_model);
      read(e, "k_feature", ec.k_feature);
      read(e, "ffn_multiplier", ec.ffn_multiplier);
      read(e, "geometry_aware", ec.geometry_aware);
    }
    if (n.contains("head")) {
      const json& h = n["head"];
      require_known(h, "network.head", {"hidden0", "hidden1"});
      read(h, "hidden0", cfg.network.head.hidden0);
      read(h, "hidden1", cfg.network.head.hidden1);
    }
  }
  if (j.contains("training")) {
    const json& t = j["training"];
    require_known(t, "training", {"steps", "batch", "lr", "cosine_decay", "rotation_augmentation", "augmentation_max_angle"});
    read(t, "steps", cfg.training.steps);
    read(t, "batch", cfg.training.batch);
    read(t, "lr", cfg.training.lr);
    read(t, "cosine_decay", cfg.training.cosine_decay);
    read(t, "rotation_augmentation", cfg.training.rotation_augmentation);
    read(t, "augmentation_max_angle", cfg.training.augmentation_max_angle);
  }
  cfg.sync_seeds();
  return cfg;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return experiment_from_json(ss.str());
}

void save_experiment(const std::filesystem::path& path, const ExperimentConfig& cfg) {
  util::write_text_atomically(path, to_json(cfg));
}

std::string loss_log_csv(const std::vector<train::LossRow>& rows) {
  std::ostringstream ss;
  ss << "step,loss,wall_ms\n";
  for (const train::LossRow& r : rows) {
    ss << r.step << ',' << std::setprecision(17) << r.loss << ',' << std::fixed << std::setprecision(3) << r.wall_ms
       << std::defaultfloat << '\n';
  }
  return ss.str();
}

TrainedRun run_training(const ExperimentConfig& cfg, const data::Dataset& dataset, const std::filesystem::path& out_dir,
                        const ProgressFn& progress) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  TrainedRun run;
  run.net = std::make_unique<net::PoseNet>(cfg.network, cfg.seed);
  try {
    // Rows are collected as they arrive so a diverged run keeps its log.
    train::fit(*run.net, dataset, cfg.training, [&](const train::LossRow& row) {
      run.log.push_back(row);
      if (progress) progress(row);
    });
  } catch (const train::DivergenceError&) {
    util::write_text_atomically(out_dir / kLossLogFile, loss_log_csv(run.log));
    throw;
  }
  util::write_text_atomically(out_dir / kLossLogFile, loss_log_csv(run.log));
  save_experiment(out_dir / kConfigFile, cfg);
  util::write_atomically(out_dir / kCheckpointFile, [&](std::ostream& os) { run.net->params().write(os); });
  run.val = train::evaluate_network(*run.net, dataset, "val");
  metrics::write_report(out_dir, run.val);
  return run;
}

namespace {

const char* block_label(net::BlockKind b) { return b == net::BlockKind::gcn ? "gcn" : "plainconv"; }

}  // namespace

std::vector<AblationCell> run_ablation(const ExperimentConfig& base, const data::Dataset& dataset,
                                       const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out_dir,
                                       const ProgressFn& progress) {
  if (seeds.empty()) throw ConfigError("ablation: at least one seed is required");
  std::vector<AblationCell> cells;
  for (std::uint64_t seed : seeds) {
    for (const bool geo : {false, true}) {
      for (const net::BlockKind block : {net::BlockKind::plainconv, net::BlockKind::gcn}) {
        ExperimentConfig cfg = base;
        cfg.seed = seed;
        cfg.sync_seeds();
        cfg.network.embed.block = block;
        cfg.network.encoder.geometry_aware = geo;
        const std::string name =
            std::string(block_label(block)) + "_geo-" + (geo ? "on" : "off") + "_seed" + std::to_string(seed);
        TrainedRun run = run_training(cfg, dataset, out_dir / name, progress);
        cells.push_back({block, geo, seed, std::move(run.val)});
      }
    }
  }
  return cells;
}

std::string ablation_table(const std::vector<AblationCell>& cells) {
  if (cells.empty()) throw CountError("ablation table: no cells");
  // Keyed by (geometry_aware, block) so rows come out in grid order.
  std::map<std::pair<bool, bool>, std::vector<double>> by_cell;
  for (const AblationCell& c : cells) by_cell[{c.geometry_aware, c.block == net::BlockKind::gcn}].push_back(c.val.add_01d_accuracy);
  const std::string& object = cells.front().val.model;
  std::ostringstream ss;
  ss << "gcn,geometry_aware," << object << ",mean\n" << std::setprecision(17);
  for (const auto& [key, values] : by_cell) {
    double total = 0.0;
    for (double v : values) total += v;
    const double mean = total / static_cast<double>(values.size());
    // A single-object table: the mean column repeats the object column.
    ss << (key.second ? "yes" : "no") << ',' << (key.first ? "yes" : "no") << ',' << mean << ',' << mean << '\n';
  }
  return ss.str();
}

std::string ablation_runs_csv(const std::vector<AblationCell>& cells) {
  std::ostringstream ss;
  ss << "block,geometry_aware,seed,val_add_01d,val_adds_auc\n" << std::setprecision(17);
  for (const AblationCell& c : cells) {
    ss << block_label(c.block) << ',' << (c.geometry_aware ? "on" : "off") << ',' << c.seed << ','
       << c.val.add_01d_accuracy << ',' << c.val.adds_auc << '\n';
  }
  return ss.str();
}

}  // namespace transpose
