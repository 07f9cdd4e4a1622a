#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "transpose/data/dataset.hpp"
#include "transpose/geometry.hpp"
#include "transpose/object_model.hpp"

namespace transpose::metrics {

/// Mean distance between corresponding vertices under the two poses.
double add(const geom::RigidTransform& pred, const geom::RigidTransform& gt, const ObjectModel& model);

/// Mean over predicted-pose vertices of the distance to the closest
/// ground-truth-pose vertex. Exhaustive over all vertex pairs.
double adds(const geom::RigidTransform& pred, const geom::RigidTransform& gt, const ObjectModel& model);

/// Fraction of distances strictly below fraction * diameter. Throws
/// CountError for an empty list.
double accuracy_below(const std::vector<double>& distances, double diameter, double fraction = 0.1);

inline constexpr double kAucMaxThreshold = 0.1;
/// Area under accuracy(threshold) on [0, max], normalized:
/// mean of clamp(1 - d / max, 0, 1).
double adds_auc(const std::vector<double>& distances, double max_threshold_m = kAucMaxThreshold);

struct SampleResult {
  std::string id;
  double add_m = 0.0;
  double adds_m = 0.0;
  /// ADD-S for symmetric models, ADD otherwise, against 0.1 d.
  bool pass_01d = false;
};

struct MetricReport {
  std::string model;
  std::string split;
  bool symmetric = false;
  double diameter = 0.0;
  std::vector<SampleResult> samples;
  /// ADD(-S) accuracy: the metric matching the model's symmetry.
  double add_01d_accuracy = 0.0;
  /// Plain ADD and plain ADD-S accuracies, reported side by side.
  double add_only_01d = 0.0;
  double adds_01d = 0.0;
  double adds_auc = 0.0;
  double mean_add_m = 0.0;
  double mean_adds_m = 0.0;

  std::size_t count() const { return samples.size(); }
};

struct PoseRecord {
  std::string id;
  geom::RigidTransform pred;
  geom::RigidTransform gt;
};

MetricReport make_report(const std::vector<PoseRecord>& records, const ObjectModel& model, const std::string& split);

using Predictor = std::function<geom::RigidTransform(const data::Sample&)>;

/// Runs `predict` on every sample of the split and aggregates.
MetricReport evaluate(const Predictor& predict, const data::Dataset& dataset, const std::string& split);

std::string report_json(const MetricReport& report);
std::string report_csv(const MetricReport& report);
/// Accuracy versus threshold (0 to 0.1 m) for ADD and ADD-S as polylines.
std::string report_svg(const MetricReport& report);

/// metrics.json, metrics.csv and curve.svg under `dir`, written atomically.
void write_report(const std::filesystem::path& dir, const MetricReport& report);

}  // namespace transpose::metrics
