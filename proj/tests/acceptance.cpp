// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any selected criterion fails.
//
//   acceptance --criteria 1,2,3,4,5,6
//   acceptance --criteria 7,8,9,10 --workdir build/acceptance

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "support/fixtures.hpp"
#include "support/geometry_oracles.hpp"
#include "support/gradcheck.hpp"
#include "transpose/autodiff/ops.hpp"
#include "transpose/data/dataset.hpp"
#include "transpose/experiment.hpp"
#include "transpose/metrics.hpp"
#include "transpose/net/encoder.hpp"
#include "transpose/util/atomic_file.hpp"

using namespace transpose;
using testing::grad_check;
using testing::random_tensor;
using testing::readout;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(4) << v;
  return ss.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// 1. Finite-difference gradients for every op and the tiny full network.

constexpr double kGradTolerance = 1e-4;
constexpr double kGradSeconds = 60.0;

ad::Tensor away_from_zero(ad::Shape shape, std::mt19937_64& rng) {
  ad::Tensor t = random_tensor(shape, rng, 0.1, 1.0);
  std::bernoulli_distribution flip(0.5);
  for (double& v : t.mutable_data()) v = flip(rng) ? -v : v;
  return t;
}

Outcome gradient_suite() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  std::map<std::string, double> worst;
  auto check = [&](const std::string& name, const std::function<ad::Tensor()>& loss, std::vector<ad::Tensor> in) {
    worst[name] = grad_check(loss, std::move(in)).max_rel_error;
  };

  ad::Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
  check("matmul", [&] { return readout(ad::matmul(a, b)); }, {a, b});
  check("transpose", [&] { return readout(ad::transpose(a)); }, {a});
  ad::Tensor big = random_tensor({2, 3, 4}, rng), small = random_tensor({3, 4}, rng, 0.5, 1.5);
  check("add", [&] { return readout(ad::add(big, small)); }, {big, small});
  check("sub", [&] { return readout(ad::sub(big, small)); }, {big, small});
  check("mul", [&] { return readout(ad::mul(big, small)); }, {big, small});
  check("scale", [&] { return readout(ad::scale(a, -1.7)); }, {a});
  ad::Tensor signed_x = away_from_zero({4, 5}, rng);
  check("relu", [&] { return readout(ad::relu(signed_x)); }, {signed_x});
  ad::Tensor logits = random_tensor({3, 5}, rng, -2.0, 2.0);
  check("softmax", [&] { return readout(ad::softmax(logits)); }, {logits});
  ad::Tensor x = random_tensor({5, 6}, rng), gain = random_tensor({6}, rng, 0.5, 1.5), bias = random_tensor({6}, rng);
  check("layer_norm", [&] { return readout(ad::layer_norm(x, gain, bias)); }, {x, gain, bias});
  ad::BatchNormStats stats{ad::Tensor({6}, 0.0), ad::Tensor({6}, 1.0)};
  check("batch_norm", [&] { return readout(ad::batch_norm(x, gain, bias, stats, ad::Mode::train)); }, {x, gain, bias});
  ad::Tensor neighborhoods = random_tensor({3, 4, 5}, rng);
  check("pool_max", [&] { return readout(ad::pool(neighborhoods, ad::PoolKind::max)); }, {neighborhoods});
  check("pool_mean", [&] { return readout(ad::pool(neighborhoods, ad::PoolKind::mean)); }, {neighborhoods});
  IndexMatrix idx(2, 3);
  const std::size_t rows[] = {4, 0, 4, 1, 2, 4};
  for (std::size_t i = 0; i < 6; ++i) idx(i / 3, i % 3) = rows[i];
  check("gather_rows", [&] { return readout(ad::gather_rows(x, idx)); }, {x});
  ad::Tensor y = random_tensor({5, 2}, rng);
  check("concat", [&] { return readout(ad::concat(x, y)); }, {x, y});
  check("slice_last", [&] { return readout(ad::slice_last(x, 2, 3)); }, {x});
  check("reshape", [&] { return readout(ad::reshape(x, {3, 10})); }, {x});
  check("sum", [&] { return ad::scale(ad::sum(ad::mul(x, x)), 0.5); }, {x});
  check("mean", [&] { return ad::mean(ad::mul(x, x)); }, {x});
  check("row_norm", [&] { return readout(ad::row_norm(x)); }, {x});
  check("row_min", [&] { return readout(ad::row_min(x)); }, {x});
  ad::Tensor q = random_tensor({4}, rng, 0.2, 1.0);
  check("l2_normalize", [&] { return readout(ad::l2_normalize(q)); }, {q});
  check("quaternion_to_rotation", [&] { return readout(ad::quaternion_to_rotation(q)); }, {q});
  ad::Tensor w = random_tensor({6, 3}, rng), bb = random_tensor({3}, rng);
  check("linear", [&] { return readout(ad::linear(x, w, bb)); }, {x, w, bb});

  // Tiny network: 64 input points, 8 final centers, d_in 16, one encoder layer.
  std::mt19937_64 cloud_rng(6);
  const auto oc = testing::ellipsoid_cloud(cloud_rng, 64, geom::Vec3(0.06, 0.04, 0.03));
  net::PoseNet network(testing::tiny_network(), 6);
  const net::EmbedPlan plan = network.plan(oc.cloud, oc.normals);
  geom::PointCloud model_points;
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (int i = 0; i < 64; ++i) model_points.points.emplace_back(u(cloud_rng), u(cloud_rng), u(cloud_rng));
  const net::LossModel model = net::LossModel::from(ObjectModel::make("blob", model_points, false), 32);
  const geom::RigidTransform gt{testing::random_rotation(cloud_rng), geom::Vec3(0.0, 0.0, 0.8)};
  std::vector<ad::Tensor> params;
  for (const auto& [name, entry] : network.params().entries()) {
    if (entry.trainable) params.push_back(entry.tensor);
  }
  const auto full = grad_check([&] { return net::pose_loss(network.forward(plan, ad::Mode::train), gt, model); },
                               params, 1e-5, 40);
  worst["network"] = full.max_rel_error;

  const double elapsed = seconds_since(start);
  std::string worst_name;
  double worst_err = 0.0;
  for (const auto& [name, err] : worst) {
    if (err >= worst_err) {
      worst_err = err;
      worst_name = name;
    }
  }
  const bool centers_ok = plan.centers.dim(0) == 8;
  return {worst_err < kGradTolerance && elapsed < kGradSeconds && centers_ok,
          std::to_string(worst.size()) + " checks, worst " + worst_name + " " + fmt(worst_err) + " (< 1e-4), " +
              std::to_string(full.checked) + " network coordinates, " + fmt(elapsed) + " s (< 60 s)"};
}

// ---------------------------------------------------------------------------
// 2. FPS and K-NN against exhaustive references.

Outcome geometry_oracles() {
  std::mt19937_64 rng(202);
  std::size_t fps_mismatch = 0, knn_mismatch = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = std::uniform_int_distribution<std::size_t>(2, 64)(rng);
    const geom::PointCloud pc = testing::random_cloud(rng, m, trial % 2 == 0);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, m)(rng);
    const std::uint64_t seed = rng();
    if (geom::fps(pc, n, seed) != testing::fps_oracle(pc, n, seed)) ++fps_mismatch;
  }
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = std::uniform_int_distribution<std::size_t>(1, 256)(rng);
    const geom::PointCloud ref = testing::random_cloud(rng, m, trial % 2 == 0);
    const geom::PointCloud queries = testing::random_cloud(rng, 8, trial % 3 == 0);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, m)(rng);
    const IndexMatrix got = geom::knn(ref, queries, k);
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      if (IndexList(got.row(qi).begin(), got.row(qi).end()) != testing::knn_oracle(ref, queries[qi], k)) ++knn_mismatch;
    }
  }
  return {fps_mismatch == 0 && knn_mismatch == 0,
          "FPS mismatches " + std::to_string(fps_mismatch) + "/200, K-NN mismatched queries " +
              std::to_string(knn_mismatch) + "/1600"};
}

// ---------------------------------------------------------------------------
// 3. Point pair features under rigid motion.

Outcome ppf_invariance() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const geom::Vec3 p1(u(rng), u(rng), u(rng)), p2(u(rng), u(rng), u(rng));
    const geom::Vec3 n1 = geom::Vec3(g(rng), g(rng), g(rng)).normalized();
    const geom::Vec3 n2 = geom::Vec3(g(rng), g(rng), g(rng)).normalized();
    const geom::RigidTransform T{testing::random_rotation(rng), geom::Vec3(3 * u(rng), 3 * u(rng), 3 * u(rng))};
    const Eigen::Vector4d before = geom::ppf(p1, n1, p2, n2);
    const Eigen::Vector4d after = geom::ppf(T.apply(p1), T.R * n1, T.apply(p2), T.R * n2);
    worst = std::max(worst, (before - after).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-9, "1000 instances, worst component deviation " + fmt(worst) + " (< 1e-9)"};
}

// ---------------------------------------------------------------------------
// 4. Quaternion to rotation matrix.

Outcome so3_suite() {
  std::mt19937_64 rng(404);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst_orth = 0.0, worst_det = 0.0;
  bool sign_exact = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const geom::UnitQuaternion q = geom::normalize_quat(Eigen::Vector4d(g(rng), g(rng), g(rng), g(rng)));
    const geom::Mat3 R = geom::quat_to_rot(q);
    worst_orth = std::max(worst_orth, (R.transpose() * R - geom::Mat3::Identity()).cwiseAbs().maxCoeff());
    worst_det = std::max(worst_det, std::abs(R.determinant() - 1.0));
    sign_exact = sign_exact && geom::quat_to_rot(-q) == R;
  }
  const bool identity_exact = geom::quat_to_rot(geom::UnitQuaternion{}) == geom::Mat3::Identity();
  // pi/2 about z as the normalized (0, 0, 1, 1).
  geom::Mat3 analytic;
  analytic << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const bool quarter_exact = geom::quat_to_rot(geom::normalize_quat(Eigen::Vector4d(0.0, 0.0, 1.0, 1.0))) == analytic;
  const bool pass = worst_orth < 1e-12 && worst_det < 1e-12 && sign_exact && identity_exact && quarter_exact;
  return {pass, "|R^T R - I|max " + fmt(worst_orth) + ", |det-1| " + fmt(worst_det) + " (< 1e-12), R(q)==R(-q) " +
                    (sign_exact ? "exact" : "NOT exact") + ", identity " + (identity_exact ? "exact" : "NOT exact") +
                    ", pi/2 about z " + (quarter_exact ? "exact" : "NOT exact")};
}

// ---------------------------------------------------------------------------
// 5. ADD / ADD-S against per-vertex loops.

double oracle_add(const geom::RigidTransform& pred, const geom::RigidTransform& gt, const ObjectModel& m) {
  long double total = 0.0L;
  for (const geom::Vec3& v : m.vertices.points) total += (pred.R * v + pred.t - (gt.R * v + gt.t)).norm();
  return static_cast<double>(total / m.vertices.size());
}

double oracle_adds(const geom::RigidTransform& pred, const geom::RigidTransform& gt, const ObjectModel& m) {
  long double total = 0.0L;
  for (const geom::Vec3& v2 : m.vertices.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const geom::Vec3& v1 : m.vertices.points) best = std::min(best, (gt.R * v1 + gt.t - (pred.R * v2 + pred.t)).norm());
    total += best;
  }
  return static_cast<double>(total / m.vertices.size());
}

Outcome metric_correctness() {
  const ObjectModel lbracket = data::builtin_model("Lbracket");
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  double worst = 0.0;
  bool ordered = true;
  for (int trial = 0; trial < 100; ++trial) {
    const geom::RigidTransform pred{testing::random_rotation(rng), geom::Vec3(u(rng), u(rng), 0.8 + u(rng))};
    const geom::RigidTransform gt{testing::random_rotation(rng), geom::Vec3(u(rng), u(rng), 0.8 + u(rng))};
    const double a = metrics::add(pred, gt, lbracket), s = metrics::adds(pred, gt, lbracket);
    worst = std::max({worst, std::abs(a - oracle_add(pred, gt, lbracket)), std::abs(s - oracle_adds(pred, gt, lbracket))});
    ordered = ordered && s <= a;
  }
  const double radius = 0.05;
  geom::PointCloud pair;
  pair.points = {{radius, 0, 0}, {-radius, 0, 0}, {radius, 0, 0}, {-radius, 0, 0}};
  const ObjectModel two_point = ObjectModel::make("pair", pair, true);
  const geom::RigidTransform half_turn{geom::quat_to_rot(geom::UnitQuaternion{{0, 0, 1, 0}}), geom::Vec3::Zero()};
  const double hand_adds = metrics::adds(half_turn, {}, two_point), hand_add = metrics::add(half_turn, {}, two_point);
  const bool hand = hand_adds < 1e-15 && std::abs(hand_add - 2 * radius) < 1e-15;
  return {worst < 1e-12 && ordered && hand, "worst oracle deviation " + fmt(worst) + " (< 1e-12), adds<=add " +
                                                (ordered ? "on all 100" : "VIOLATED") + ", two-point: adds " +
                                                fmt(hand_adds) + ", add " + fmt(hand_add) + " (2r = 0.1)"};
}

// ---------------------------------------------------------------------------
// 6. Encoder symmetry and attention normalization.

ad::Tensor permute_rows(const ad::Tensor& x, const IndexList& perm) {
  IndexMatrix idx(perm.size(), 1);
  for (std::size_t i = 0; i < perm.size(); ++i) idx(i, 0) = perm[i];
  return ad::reshape(ad::gather_rows(x, idx), {perm.size(), x.dim(1)});
}

double max_abs_diff(const ad::Tensor& a, const ad::Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

Outcome encoder_invariants() {
  net::EncoderConfig cfg;
  ad::ParamStore store(606);
  const net::Encoder encoder(store, cfg);
  std::mt19937_64 rng(606);
  double worst_rows = 0.0, worst_pool = 0.0, worst_sum = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const ad::Tensor x = random_tensor({32, cfg.d_model}, rng);
    IndexList perm(32);
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<ad::Tensor> attention;
    const ad::Tensor y = encoder(x, &attention);
    const ad::Tensor permuted = encoder(permute_rows(x, perm));
    worst_rows = std::max(worst_rows, max_abs_diff(permute_rows(y, perm), permuted));
    worst_pool = std::max(worst_pool, max_abs_diff(net::global_pool(y), net::global_pool(permuted)));
    for (const ad::Tensor& w : attention) {
      for (std::size_t i = 0; i < w.dim(0); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < w.dim(1); ++j) s += w.at(i, j);
        worst_sum = std::max(worst_sum, std::abs(s - 1.0));
      }
    }
  }
  return {worst_rows < 1e-12 && worst_pool < 1e-12 && worst_sum < 1e-12,
          "50 instances: equivariance " + fmt(worst_rows) + ", pooled invariance " + fmt(worst_pool) +
              ", attention row sums " + fmt(worst_sum) + " (all < 1e-12)"};
}

// ---------------------------------------------------------------------------
// 7-10. Training runs, shared between criteria.

constexpr std::uint64_t kSeeds[] = {0, 1, 2};
constexpr double kTrainAccuracy = 0.90;
constexpr double kValAccuracy = 0.60;
constexpr double kWallSeconds = 15 * 60.0;

struct SeedRuns {
  double full_train = 0.0;
  double full_val = 0.0;
  double full_seconds = 0.0;
  double baseline_val = 0.0;
};

class TrainingRuns {
 public:
  explicit TrainingRuns(fs::path workdir) : workdir_(std::move(workdir)) {}

  /// Default configuration on the asymmetric object, every ablation cell.
  const SeedRuns& lbracket(std::uint64_t seed) {
    if (auto it = seeds_.find(seed); it != seeds_.end()) return it->second;
    const ExperimentConfig base = default_config("Lbracket", seed);
    const auto start = Clock::now();
    const data::Dataset ds = data::generate_dataset(data::builtin_model(base.model), base.scene);
    const double generation_seconds = seconds_since(start);
    SeedRuns runs;
    for (const bool geo : {false, true}) {
      for (const net::BlockKind block : {net::BlockKind::plainconv, net::BlockKind::gcn}) {
        ExperimentConfig cfg = base;
        cfg.network.embed.block = block;
        cfg.network.encoder.geometry_aware = geo;
        const bool full = block == net::BlockKind::gcn && geo;
        const auto run_start = Clock::now();
        const std::string name = std::string(block == net::BlockKind::gcn ? "gcn" : "plainconv") + "_geo-" +
                                 (geo ? "on" : "off") + "_seed" + std::to_string(seed);
        TrainedRun run = run_training(cfg, ds, workdir_ / name);
        if (full) {
          runs.full_val = run.val.add_01d_accuracy;
          runs.full_train = train::evaluate_network(*run.net, ds, "train").add_01d_accuracy;
          runs.full_seconds = generation_seconds + seconds_since(run_start);
        } else if (block == net::BlockKind::plainconv && !geo) {
          runs.baseline_val = run.val.add_01d_accuracy;
        }
        cells_.push_back({block, geo, seed, std::move(run.val)});
      }
    }
    util::write_text_atomically(workdir_ / "ablation.csv", ablation_table(cells_));
    util::write_text_atomically(workdir_ / "ablation_runs.csv", ablation_runs_csv(cells_));
    return seeds_.emplace(seed, runs).first->second;
  }

  const fs::path& workdir() const { return workdir_; }

  static ExperimentConfig default_config(const std::string& model, std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.model = model;
    cfg.seed = seed;
    cfg.sync_seeds();
    return cfg;
  }

 private:
  fs::path workdir_;
  std::map<std::uint64_t, SeedRuns> seeds_;
  std::vector<AblationCell> cells_;
};

Outcome desk_learning(TrainingRuns& runs) {
  const ExperimentConfig cfg = TrainingRuns::default_config("Lbracket", 0);
  if (cfg.scene.train_samples != 256 || cfg.scene.noise_sigma != 0.002 || cfg.scene.cull_fraction != 0.3 ||
      cfg.training.steps != 2000 || cfg.training.batch != 8) {
    return {false, "default configuration drifted from 256 samples / 2 mm / cull 0.3 / 2000 steps / batch 8"};
  }
  int good = 0;
  bool fast = true;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    const SeedRuns& r = runs.lbracket(seed);
    const bool ok = r.full_train >= kTrainAccuracy && r.full_val >= kValAccuracy;
    good += ok;
    fast = fast && r.full_seconds < kWallSeconds;
    detail += "seed " + std::to_string(seed) + ": train " + fmt(r.full_train) + " val " + fmt(r.full_val) + " in " +
              fmt(r.full_seconds) + " s; ";
  }
  return {good >= 2 && fast, detail + std::to_string(good) + "/3 seeds reach train >= 0.90 and val >= 0.60"};
}

Outcome ablation_direction(TrainingRuns& runs) {
  int good = 0;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    const SeedRuns& r = runs.lbracket(seed);
    good += r.full_val >= r.baseline_val;
    detail += "seed " + std::to_string(seed) + ": full " + fmt(r.full_val) + " vs baseline " + fmt(r.baseline_val) + "; ";
  }
  const std::string table = slurp(runs.workdir() / "ablation.csv");
  const bool shaped = table.rfind("gcn,geometry_aware,Lbracket,mean\n", 0) == 0 &&
                      std::count(table.begin(), table.end(), '\n') == 5;
  return {good >= 2 && shaped, detail + std::to_string(good) + "/3 seeds full >= baseline; table " +
                                   (runs.workdir() / "ablation.csv").string() + (shaped ? "" : " MALFORMED")};
}

Outcome symmetric_handling(TrainingRuns& runs) {
  const ExperimentConfig cfg = TrainingRuns::default_config("eggboxoid", 0);
  const data::Dataset ds = data::generate_dataset(data::builtin_model(cfg.model), cfg.scene);
  const TrainedRun run = run_training(cfg, ds, runs.workdir() / "eggboxoid_seed0");
  const metrics::MetricReport& r = run.val;
  return {r.symmetric && r.adds_01d >= kValAccuracy && r.adds_01d > r.add_only_01d,
          "val ADD-S-0.1d " + fmt(r.adds_01d) + " (>= 0.60), ADD-0.1d " + fmt(r.add_only_01d) + ", adds_01d > add_01d " +
              (r.adds_01d > r.add_only_01d ? "yes" : "no")};
}

Outcome determinism(TrainingRuns& runs) {
  runs.lbracket(0);
  const ExperimentConfig cfg = TrainingRuns::default_config("Lbracket", 0);
  const data::Dataset ds = data::generate_dataset(data::builtin_model(cfg.model), cfg.scene);
  const fs::path first = runs.workdir() / "gcn_geo-on_seed0", repeat = runs.workdir() / "repeat_seed0";
  run_training(cfg, ds, repeat);
  const bool checkpoint = slurp(first / kCheckpointFile) == slurp(repeat / kCheckpointFile);
  const bool report = slurp(first / "metrics.json") == slurp(repeat / "metrics.json");
  return {checkpoint && report, std::string("checkpoint ") + (checkpoint ? "bit-identical" : "DIFFERS") +
                                    ", metrics.json " + (report ? "bit-identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> selected{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::string workdir = (fs::temp_directory_path() / "transpose_acceptance").string();
  app.add_option("--criteria", selected, "Criteria to run")->delimiter(',');
  app.add_option("--workdir", workdir, "Where training runs are written");
  CLI11_PARSE(app, argc, argv);

  TrainingRuns runs{fs::path(workdir)};
  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria = {
      {1, {"gradient suite", gradient_suite}},
      {2, {"FPS and K-NN oracles", geometry_oracles}},
      {3, {"PPF rigid invariance", ppf_invariance}},
      {4, {"SO(3) suite", so3_suite}},
      {5, {"metric correctness", metric_correctness}},
      {6, {"encoder invariants", encoder_invariants}},
      {7, {"desk-scale learning", [&] { return desk_learning(runs); }}},
      {8, {"ablation direction", [&] { return ablation_direction(runs); }}},
      {9, {"symmetric handling", [&] { return symmetric_handling(runs); }}},
      {10, {"determinism", [&] { return determinism(runs); }}},
  };

  int failures = 0;
  for (int id : selected) {
    const auto it = criteria.find(id);
    if (it == criteria.end()) {
      std::cerr << "unknown criterion " << id << '\n';
      return 2;
    }
    Outcome outcome;
    try {
      outcome = it->second.second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw: ") + e.what()};
    }
    failures += !outcome.pass;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << it->second.first
              << "): " << outcome.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
