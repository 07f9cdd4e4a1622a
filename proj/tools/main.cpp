// transpose: dataset generation, training, evaluation, inference and the
// ablation grid from one binary. Exit codes: 0 ok, 1 runtime failure,
// 2 usage, configuration or IO error.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "transpose/data/dataset.hpp"
#include "transpose/errors.hpp"
#include "transpose/experiment.hpp"
#include "transpose/geometry_io.hpp"
#include "transpose/metrics.hpp"
#include "transpose/train.hpp"
#include "transpose/util/atomic_file.hpp"

namespace fs = std::filesystem;
using namespace transpose;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Values given on the command line; each one overrides the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> model;
  std::optional<std::size_t> train_samples, val_samples, steps, batch;
  std::optional<double> noise, cull, occluder, lr;
  std::optional<std::string> block;
  std::optional<bool> geometry_aware, augment;

  void add_scene(CLI::App& cmd) {
    cmd.add_option("--model", model, "Builtin object: Lbracket, eggboxoid, mug-like");
    cmd.add_option("--train-samples", train_samples);
    cmd.add_option("--val-samples", val_samples);
    cmd.add_option("--noise", noise, "Gaussian noise sigma in meters");
    cmd.add_option("--cull", cull, "Fraction of far-side points removed");
    cmd.add_option("--occluder", occluder, "Fraction of points removed by the spherical occluder");
  }

  void add_training(CLI::App& cmd) {
    cmd.add_option("--steps", steps);
    cmd.add_option("--batch", batch);
    cmd.add_option("--lr", lr);
    cmd.add_option("--block", block, "Embedding block: gcn or plainconv")->check(CLI::IsMember({"gcn", "plainconv"}));
    cmd.add_option("--geometry-aware", geometry_aware, "Geometry-aware encoder branch (true/false)");
    cmd.add_option("--augment", augment, "Random rotation augmentation (true/false)");
  }

  void apply(ExperimentConfig& cfg) const {
    if (seed) cfg.seed = *seed;
    if (model) cfg.model = *model;
    if (train_samples) cfg.scene.train_samples = *train_samples;
    if (val_samples) cfg.scene.val_samples = *val_samples;
    if (noise) cfg.scene.noise_sigma = *noise;
    if (cull) cfg.scene.cull_fraction = *cull;
    if (occluder) cfg.scene.occluder_fraction = *occluder;
    if (steps) cfg.training.steps = *steps;
    if (batch) cfg.training.batch = *batch;
    if (lr) cfg.training.lr = *lr;
    if (block) cfg.network.embed.block = *block == "gcn" ? net::BlockKind::gcn : net::BlockKind::plainconv;
    if (geometry_aware) cfg.network.encoder.geometry_aware = *geometry_aware;
    if (augment) cfg.training.rotation_augmentation = *augment;
    cfg.sync_seeds();
  }
};

ExperimentConfig resolve_config(const std::string& path, const Overrides& overrides) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : load_experiment(path);
  overrides.apply(cfg);
  cfg.validate();
  return cfg;
}

/// The dataset's own object model wins over the config's model name.
data::Dataset load_data(const fs::path& dir, const ExperimentConfig& cfg) {
  data::Dataset ds = data::load_dataset(dir);
  if (ds.model.name != cfg.model) {
    std::cerr << "note: dataset object '" << ds.model.name << "' overrides config model '" << cfg.model << "'\n";
  }
  return ds;
}

void log_progress(const train::LossRow& r) {
  if ((r.step + 1) % 100 == 0) std::cerr << "  step " << r.step + 1 << " loss " << r.loss << '\n';
}

void print_report(const metrics::MetricReport& r) {
  std::cout << r.model << " " << r.split << ": n=" << r.count() << " ADD(-S)-0.1d=" << r.add_01d_accuracy
            << " ADD-0.1d=" << r.add_only_01d << " ADD-S-0.1d=" << r.adds_01d << " ADD-S AUC=" << r.adds_auc << '\n';
}

/// Config beside the checkpoint unless one is given explicitly.
fs::path config_for(const fs::path& checkpoint, const std::string& explicit_config) {
  if (!fs::exists(checkpoint)) throw IoError("checkpoint '" + checkpoint.string() + "' does not exist");
  if (!explicit_config.empty()) return explicit_config;
  return checkpoint.parent_path() / kConfigFile;
}

std::unique_ptr<net::PoseNet> load_network(const fs::path& checkpoint, const ExperimentConfig& cfg) {
  auto net = std::make_unique<net::PoseNet>(cfg.network, cfg.seed);
  net->params().load(checkpoint);
  return net;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point cloud 6D object pose estimation"};
  app.require_subcommand(1);
  Overrides overrides;
  std::string config_path, data_dir, out_dir, checkpoint, split = "val", cloud_path;
  bool oracle = false;
  std::vector<std::uint64_t> seeds;

  CLI::App* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen->add_option("--config", config_path, "Experiment config (JSON)");
  gen->add_option("--out", out_dir, "Dataset directory")->required();
  gen->add_option("--seed", overrides.seed);
  overrides.add_scene(*gen);

  CLI::App* train_cmd = app.add_subcommand("train", "Train on a dataset and report validation metrics");
  train_cmd->add_option("--config", config_path);
  train_cmd->add_option("--data", data_dir)->required();
  train_cmd->add_option("--out", out_dir)->required();
  train_cmd->add_option("--seed", overrides.seed);
  overrides.add_training(*train_cmd);

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  eval->add_option("--checkpoint", checkpoint);
  eval->add_option("--config", config_path, "Defaults to config.json beside the checkpoint");
  eval->add_option("--data", data_dir)->required();
  eval->add_option("--split", split)->check(CLI::IsMember({"train", "val", "all"}));
  eval->add_option("--out", out_dir)->required();
  eval->add_flag("--oracle", oracle, "Score the ground truth instead of a checkpoint");

  CLI::App* infer = app.add_subcommand("infer", "Estimate the pose of one cloud");
  infer->add_option("--checkpoint", checkpoint)->required();
  infer->add_option("--config", config_path, "Defaults to config.json beside the checkpoint");
  infer->add_option("--cloud", cloud_path, "ASCII PLY in camera coordinates (meters)")->required();

  CLI::App* ablate = app.add_subcommand("ablate", "Train the block x geometry-aware grid");
  ablate->add_option("--config", config_path);
  ablate->add_option("--data", data_dir)->required();
  ablate->add_option("--out", out_dir)->required();
  ablate->add_option("--seeds", seeds, "Seeds to run; default: the config seed")->delimiter(',');
  ablate->add_option("--steps", overrides.steps);
  ablate->add_option("--lr", overrides.lr);
  ablate->add_option("--augment", overrides.augment);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) {
      const ExperimentConfig cfg = resolve_config(config_path, overrides);
      std::cerr << "generating " << cfg.model << " (seed " << cfg.seed << ")\n";
      const data::Dataset ds = data::generate_dataset(data::builtin_model(cfg.model), cfg.scene);
      data::save_dataset(out_dir, ds);
      std::cout << "wrote " << ds.samples.size() << " samples (" << cfg.scene.train_samples << " train, "
                << cfg.scene.val_samples << " val) to " << out_dir << '\n';
    } else if (*train_cmd) {
      const ExperimentConfig cfg = resolve_config(config_path, overrides);
      const data::Dataset ds = load_data(data_dir, cfg);
      std::cerr << "training " << cfg.model << " (seed " << cfg.seed << ", " << cfg.training.steps << " steps)\n";
      print_report(run_training(cfg, ds, out_dir, log_progress).val);
    } else if (*eval) {
      const data::Dataset ds = data::load_dataset(data_dir);
      metrics::MetricReport report;
      if (oracle) {
        report = metrics::evaluate([](const data::Sample& s) { return s.gt; }, ds, split);
      } else {
        if (checkpoint.empty()) throw ConfigError("eval: --checkpoint is required unless --oracle is given");
        const ExperimentConfig cfg = resolve_config(config_for(checkpoint, config_path).string(), overrides);
        const auto net = load_network(checkpoint, cfg);
        report = train::evaluate_network(*net, ds, split);
      }
      fs::create_directories(out_dir);
      metrics::write_report(out_dir, report);
      print_report(report);
    } else if (*infer) {
      const ExperimentConfig cfg = resolve_config(config_for(checkpoint, config_path).string(), overrides);
      const auto net = load_network(checkpoint, cfg);
      if (!fs::exists(cloud_path)) throw IoError("cloud '" + cloud_path + "' does not exist");
      geom::PlyCloud ply = geom::read_ply(fs::path(cloud_path));
      auto [cloud, normals] = data::prepare_cloud(std::move(ply.cloud), cfg.scene.max_points, cfg.scene.normal_neighbors);
      const net::PoseEstimate pose = net->predict(net->plan(cloud, normals));
      const nlohmann::json line = {
          {"q", {pose.rotation[0], pose.rotation[1], pose.rotation[2], pose.rotation[3]}},
          {"t", {pose.translation.x(), pose.translation.y(), pose.translation.z()}}};
      std::cout << line.dump() << '\n';
    } else if (*ablate) {
      ExperimentConfig base = resolve_config(config_path, overrides);
      const data::Dataset ds = load_data(data_dir, base);
      if (seeds.empty()) seeds.push_back(base.seed);
      const std::vector<AblationCell> cells = run_ablation(base, ds, seeds, out_dir, log_progress);
      util::write_text_atomically(fs::path(out_dir) / "ablation.csv", ablation_table(cells));
      util::write_text_atomically(fs::path(out_dir) / "ablation_runs.csv", ablation_runs_csv(cells));
      std::cout << ablation_table(cells);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
