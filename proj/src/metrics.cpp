#include "transpose/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "transpose/errors.hpp"
#include "transpose/util/atomic_file.hpp"

namespace transpose::metrics {

namespace {

std::vector<geom::Vec3> transformed(const geom::RigidTransform& T, const ObjectModel& model) {
  std::vector<geom::Vec3> out;
  out.reserve(model.vertices.size());
  for (const geom::Vec3& v : model.vertices.points) out.push_back(T.apply(v));
  return out;
}

/// Neumaier-compensated mean.
double stable_mean(const std::vector<double>& values) {
  double sum = 0.0, comp = 0.0;
  for (double v : values) {
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return (sum + comp) / static_cast<double>(values.size());
}

void require_nonempty(const std::vector<double>& d, const char* what) {
  if (d.empty()) throw CountError(std::string(what) + ": no distances");
}

std::string fixed(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

}  // namespace

double add(const geom::RigidTransform& pred, const geom::RigidTransform& gt, const ObjectModel& model) {
  const auto p = transformed(pred, model), g = transformed(gt, model);
  std::vector<double> d(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) d[i] = (p[i] - g[i]).norm();
  return stable_mean(d);
}

double adds(const geom::RigidTransform& pred, const geom::RigidTransform& gt, const ObjectModel& model) {
  const auto p = transformed(pred, model), g = transformed(gt, model);
  std::vector<double> d(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (const geom::Vec3& q : g) best = std::min(best, (p[i] - q).squaredNorm());
    d[i] = std::sqrt(best);
  }
  return stable_mean(d);
}

double accuracy_below(const std::vector<double>& distances, double diameter, double fraction) {
  require_nonempty(distances, "accuracy");
  if (!(diameter > 0.0)) throw GeometryError("accuracy: diameter must be positive");
  const double threshold = fraction * diameter;
  const auto passed = std::count_if(distances.begin(), distances.end(), [threshold](double d) { return d < threshold; });
  return static_cast<double>(passed) / static_cast<double>(distances.size());
}

double adds_auc(const std::vector<double>& distances, double max_threshold_m) {
  require_nonempty(distances, "auc");
  if (!(max_threshold_m > 0.0)) throw ConfigError("auc: max threshold must be positive");
  std::vector<double> area(distances.size());
  for (std::size_t i = 0; i < distances.size(); ++i) {
    area[i] = std::clamp(1.0 - distances[i] / max_threshold_m, 0.0, 1.0);
  }
  return stable_mean(area);
}

MetricReport make_report(const std::vector<PoseRecord>& records, const ObjectModel& model, const std::string& split) {
  if (records.empty()) throw CountError("report: split '" + split + "' has no samples");
  MetricReport r;
  r.model = model.name;
  r.split = split;
  r.symmetric = model.symmetric;
  r.diameter = model.diameter;
  std::vector<double> add_d, adds_d, matched;
  for (const PoseRecord& rec : records) {
    SampleResult s;
    s.id = rec.id;
    s.add_m = add(rec.pred, rec.gt, model);
    s.adds_m = adds(rec.pred, rec.gt, model);
    const double metric = model.symmetric ? s.adds_m : s.add_m;
    s.pass_01d = metric < 0.1 * model.diameter;
    add_d.push_back(s.add_m);
    adds_d.push_back(s.adds_m);
    matched.push_back(metric);
    r.samples.push_back(std::move(s));
  }
  r.add_01d_accuracy = accuracy_below(matched, model.diameter);
  r.add_only_01d = accuracy_below(add_d, model.diameter);
  r.adds_01d = accuracy_below(adds_d, model.diameter);
  r.adds_auc = adds_auc(adds_d);
  r.mean_add_m = stable_mean(add_d);
  r.mean_adds_m = stable_mean(adds_d);
  return r;
}

MetricReport evaluate(const Predictor& predict, const data::Dataset& dataset, const std::string& split) {
  std::vector<PoseRecord> records;
  for (const data::Sample* s : dataset.split(split)) records.push_back({s->id, predict(*s), s->gt});
  return make_report(records, dataset.model, split);
}

std::string report_json(const MetricReport& r) {
  const nlohmann::json j = {{"model", r.model},
                            {"split", r.split},
                            {"symmetric", r.symmetric},
                            {"diameter_m", r.diameter},
                            {"count", r.count()},
                            {"add_01d", r.add_01d_accuracy},
                            {"add_only_01d", r.add_only_01d},
                            {"adds_01d", r.adds_01d},
                            {"adds_auc", r.adds_auc},
                            {"mean_add_m", r.mean_add_m},
                            {"mean_adds_m", r.mean_adds_m}};
  return j.dump(2) + "\n";
}

std::string report_csv(const MetricReport& r) {
  std::ostringstream ss;
  ss << "sample_id,add_m,adds_m,pass_01d\n";
  for (const SampleResult& s : r.samples) {
    ss << s.id << ',' << fixed(s.add_m) << ',' << fixed(s.adds_m) << ',' << (s.pass_01d ? 1 : 0) << '\n';
  }
  return ss.str();
}

std::string report_svg(const MetricReport& r) {
  constexpr double width = 480.0, height = 320.0, margin = 40.0;
  constexpr int steps = 100;
  auto polyline = [&](const std::vector<double>& d, const char* color) {
    std::ostringstream pts;
    pts << std::fixed << std::setprecision(2);
    for (int i = 0; i <= steps; ++i) {
      const double threshold = kAucMaxThreshold * i / steps;
      const auto below = std::count_if(d.begin(), d.end(), [threshold](double v) { return v < threshold; });
      const double acc = static_cast<double>(below) / static_cast<double>(d.size());
      pts << (i ? " " : "") << margin + (width - 2 * margin) * i / steps << ','
          << height - margin - (height - 2 * margin) * acc;
    }
    return "  <polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" +
           pts.str() + "\"/>\n";
  };
  std::vector<double> add_d, adds_d;
  for (const SampleResult& s : r.samples) {
    add_d.push_back(s.add_m);
    adds_d.push_back(s.adds_m);
  }
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n"
      << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "  <line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n"
      << "  <line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\"" << height - margin
      << "\" stroke=\"black\"/>\n"
      << "  <text x=\"" << width / 2 << "\" y=\"" << height - 8 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << "threshold (0 to 0.1 m)</text>\n"
      << "  <text x=\"12\" y=\"" << height / 2 << "\" font-size=\"12\" transform=\"rotate(-90 12 " << height / 2
      << ")\" text-anchor=\"middle\">accuracy</text>\n"
      << "  <text x=\"" << margin + 8 << "\" y=\"" << margin - 12 << "\" font-size=\"12\">" << r.model << " / "
      << r.split << ": ADD (blue), ADD-S (orange)</text>\n"
      << polyline(add_d, "#1f77b4") << polyline(adds_d, "#ff7f0e") << "</svg>\n";
  return svg.str();
}

void write_report(const std::filesystem::path& dir, const MetricReport& report) {
  util::write_text_atomically(dir / "metrics.json", report_json(report));
  util::write_text_atomically(dir / "metrics.csv", report_csv(report));
  util::write_text_atomically(dir / "curve.svg", report_svg(report));
}

}  // namespace transpose::metrics
