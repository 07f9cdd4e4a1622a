#include "transpose/train.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "transpose/util/rng.hpp"

namespace transpose::train {

namespace {

geom::Mat3 random_spin(std::mt19937_64& rng, double max_angle) {
  std::normal_distribution<double> g(0.0, 1.0);
  if (max_angle >= std::numbers::pi) {
    Eigen::Vector4d raw;
    do raw = Eigen::Vector4d(g(rng), g(rng), g(rng), g(rng));
    while (raw.norm() <= geom::kQuaternionEps);
    return geom::quat_to_rot(geom::normalize_quat(raw));
  }
  geom::Vec3 axis;
  do axis = geom::Vec3(g(rng), g(rng), g(rng));
  while (axis.norm() <= 1e-12);
  const double angle = std::uniform_real_distribution<double>(0.0, max_angle)(rng);
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

}  // namespace

void TrainOptions::validate() const {
  if (batch == 0) throw ConfigError("train: batch must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train: lr must be positive");
  if (!(augmentation_max_angle > 0.0)) throw ConfigError("train: augmentation_max_angle must be positive");
}

DivergenceError::DivergenceError(std::size_t step, double loss)
    : StateError("training diverged at step " + std::to_string(step) + ": loss = " + std::to_string(loss)),
      step_(step) {}

std::vector<LossRow> fit(net::PoseNet& net, const data::Dataset& dataset, const TrainOptions& options,
                         const std::function<void(const LossRow&)>& on_step) {
  options.validate();
  const auto train = dataset.split("train");
  if (train.empty()) throw CountError("train: the train split is empty");
  std::vector<LossRow> log;
  if (options.steps == 0) return log;

  const net::LossModel loss_model = net::LossModel::from(dataset.model, net::kLossPoints);
  std::vector<net::EmbedPlan> plans;
  plans.reserve(train.size());
  for (const data::Sample* s : train) plans.push_back(net.plan(s->cloud, s->normals));

  ad::Adam adam({options.lr, 0.9, 0.999, 1e-8, options.cosine_decay ? options.steps : 0});
  std::mt19937_64 order_rng(util::mix_seed(options.seed, util::hash_string("batch order")));
  std::mt19937_64 spin_rng(util::mix_seed(options.seed, util::hash_string("rotation augmentation")));
  std::vector<std::size_t> order(train.size());
  std::size_t cursor = order.size();

  const auto start = std::chrono::steady_clock::now();
  std::vector<net::EmbedPlan> spun(options.batch);
  std::vector<net::TrainItem> batch(options.batch);
  for (std::size_t step = 0; step < options.steps; ++step) {
    for (std::size_t b = 0; b < options.batch; ++b) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), order_rng);
        cursor = 0;
      }
      const std::size_t i = order[cursor++];
      net::TrainItem& item = batch[b];
      item.model = &loss_model;
      item.gt = train[i]->gt;
      if (options.rotation_augmentation) {
        const geom::Mat3 spin = random_spin(spin_rng, options.augmentation_max_angle);
        spun[b] = plans[i].rotated(spin);
        item.plan = &spun[b];
        item.gt = spin_about(item.gt, spin, plans[i].barycenter);
      } else {
        item.plan = &plans[i];
      }
    }
    const double loss = net::train_step(net, adam, batch);
    if (!std::isfinite(loss)) throw DivergenceError(step, loss);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    log.push_back({step, loss, ms});
    if (on_step) on_step(log.back());
  }
  return log;
}

geom::RigidTransform spin_about(const geom::RigidTransform& gt, const geom::Mat3& spin, const geom::Vec3& center) {
  return {spin * gt.R, spin * (gt.t - center) + center};
}

geom::RigidTransform predict_pose(const net::PoseNet& net, const data::Sample& sample) {
  return net.predict(net.plan(sample.cloud, sample.normals)).transform();
}

metrics::MetricReport evaluate_network(const net::PoseNet& net, const data::Dataset& dataset,
                                       const std::string& split) {
  return metrics::evaluate([&net](const data::Sample& s) { return predict_pose(net, s); }, dataset, split);
}

}  // namespace transpose::train
