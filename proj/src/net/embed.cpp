#include "transpose/net/embed.hpp"

#include "transpose/errors.hpp"

namespace transpose::net {

namespace {

geom::Vec3 row3(std::span<const double> data, std::size_t offset) {
  return {data[offset], data[offset + 1], data[offset + 2]};
}

void put3(std::span<double> data, std::size_t offset, const geom::Vec3& v) {
  data[offset] = v.x();
  data[offset + 1] = v.y();
  data[offset + 2] = v.z();
}

/// Rotates every `stride`-strided triple starting at `offset`.
ad::Tensor rotate_triples(const ad::Tensor& t, const geom::Mat3& R, std::size_t stride,
                          std::initializer_list<std::size_t> offsets) {
  ad::Tensor out = t.clone();
  auto data = out.mutable_data();
  for (std::size_t base = 0; base < data.size(); base += stride) {
    for (std::size_t off : offsets) put3(data, base + off, R * row3(data, base + off));
  }
  return out;
}

}  // namespace

void EmbedConfig::validate() const {
  if (widths.empty()) throw ConfigError("embed: at least one block is required");
  if (k_neighbors.size() != widths.size()) throw ConfigError("embed: need one k per block");
  if (downsample.size() + 1 != widths.size()) throw ConfigError("embed: need one downsample factor between blocks");
  if (initial_centers == 0) throw ConfigError("embed: initial_centers must be positive");
  for (std::size_t w : widths) {
    if (w == 0) throw ConfigError("embed: widths must be positive");
  }
  for (std::size_t k : k_neighbors) {
    if (k == 0) throw ConfigError("embed: k must be positive");
  }
  for (std::size_t f : downsample) {
    if (f == 0) throw ConfigError("embed: downsample factors must be >= 1");
  }
  if (d_in != widths.back()) throw ConfigError("embed: d_in must equal the last block width");
  for (std::size_t b = 1; b < widths.size(); ++b) {
    const std::size_t available = centers_at(b) - (include_self ? 0 : 1);
    if (k_neighbors[b] > available) {
      throw ConfigError("embed: block " + std::to_string(b) + " asks for " + std::to_string(k_neighbors[b]) +
                        " neighbors among " + std::to_string(centers_at(b)) + " centers");
    }
  }
}

std::size_t EmbedConfig::centers_at(std::size_t block) const {
  std::size_t n = initial_centers;
  for (std::size_t b = 0; b < block; ++b) n = (n + downsample[b] - 1) / downsample[b];
  return n;
}

EmbedPlan EmbedPlan::rotated(const geom::Mat3& R) const {
  EmbedPlan out;
  out.barycenter = barycenter;
  out.length_scale = length_scale;
  out.centers = rotate_triples(centers, R, 3, {0});
  out.blocks.reserve(blocks.size());
  for (const BlockGeometry& b : blocks) {
    out.blocks.push_back({b.carried, b.neighbor_rows, rotate_triples(b.edges, R, kEdgeGeometryWidth, {kPpfWidth}),
                          rotate_triples(b.center_attrs, R, 6, {0, 3})});
  }
  return out;
}

BlockGeometry block_geometry(const geom::PointCloud& points, const geom::NormalField& normals,
                             const IndexList& centers, std::size_t k, bool include_self) {
  if (normals.size() != points.size()) throw DimensionError("block geometry: one normal per point is required");
  BlockGeometry geo;
  geo.neighbor_rows = include_self ? geom::knn(points, geom::select(points, centers), k)
                                   : geom::knn_excluding_self(points, centers, k);
  const std::size_t n = centers.size();
  geo.edges = ad::Tensor({n, k, kEdgeGeometryWidth});
  geo.center_attrs = ad::Tensor({n, 6});
  auto edges = geo.edges.mutable_data();
  auto attrs = geo.center_attrs.mutable_data();
  for (std::size_t i = 0; i < n; ++i) {
    const geom::Vec3& p = points[centers[i]];
    const geom::Vec3& np = normals[centers[i]];
    put3(attrs, 6 * i, p);
    put3(attrs, 6 * i + 3, np);
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t nb = geo.neighbor_rows(i, j);
      const Eigen::Vector4d f = geom::ppf(p, np, points[nb], normals[nb]);
      const std::size_t base = (i * k + j) * kEdgeGeometryWidth;
      for (std::size_t c = 0; c < kPpfWidth; ++c) edges[base + c] = f[static_cast<Eigen::Index>(c)];
      put3(edges, base + kPpfWidth, points[nb] - p);
    }
  }
  return geo;
}

EmbedPlan make_plan(const geom::PointCloud& cloud, const geom::NormalField& normals, const EmbedConfig& cfg,
                    double length_scale) {
  cfg.validate();
  if (cloud.size() < cfg.initial_centers) {
    throw CountError("embed: cloud has " + std::to_string(cloud.size()) + " points, fewer than " +
                     std::to_string(cfg.initial_centers) + " centers");
  }
  EmbedPlan plan;
  plan.barycenter = geom::barycenter(cloud);
  plan.length_scale = length_scale;
  geom::PointCloud level;
  level.points.reserve(cloud.size());
  for (const geom::Vec3& p : cloud.points) level.points.push_back((p - plan.barycenter) * length_scale);
  geom::NormalField level_normals = normals;

  IndexList centers = geom::fps(level, cfg.initial_centers, cfg.fps_seed);
  plan.blocks.push_back(block_geometry(level, level_normals, centers, cfg.k_neighbors[0], cfg.include_self));
  for (std::size_t b = 1; b < cfg.widths.size(); ++b) {
    level = geom::select(level, centers);
    level_normals = geom::select(level_normals, centers);
    const std::size_t n = cfg.centers_at(b);
    const IndexList kept = geom::fps(level, n, cfg.fps_seed);
    IndexList all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    const geom::PointCloud kept_points = geom::select(level, kept);
    BlockGeometry geo =
        block_geometry(kept_points, geom::select(level_normals, kept), all, cfg.k_neighbors[b], cfg.include_self);
    // Re-express neighbors as rows of the previous block's output.
    std::vector<std::size_t> rows(geo.neighbor_rows.data());
    for (std::size_t& r : rows) r = kept[r];
    geo.neighbor_rows = IndexMatrix(geo.neighbor_rows.rows(), geo.neighbor_rows.cols(), std::move(rows));
    geo.carried = kept;
    plan.blocks.push_back(std::move(geo));
    level = kept_points;
    level_normals = geom::select(level_normals, kept);
    centers = all;
  }
  const geom::PointCloud final_centers = geom::select(level, centers);
  plan.centers = ad::Tensor({final_centers.size(), 3});
  auto data = plan.centers.mutable_data();
  for (std::size_t i = 0; i < final_centers.size(); ++i) put3(data, 3 * i, final_centers[i]);
  return plan;
}

Downsampled fps_downsample(const geom::PointCloud& centers, const ad::Tensor& features, std::size_t factor,
                           std::uint64_t seed) {
  if (factor == 0) throw CountError("fps_downsample: factor must be >= 1");
  if (centers.empty()) throw CountError("fps_downsample: no centers");
  if (features.rank() != 2 || features.dim(0) != centers.size()) {
    throw DimensionError("fps_downsample: one feature row per center is required");
  }
  Downsampled out;
  out.kept = geom::fps(centers, (centers.size() + factor - 1) / factor, seed);
  out.centers = geom::select(centers, out.kept);
  IndexMatrix rows(out.kept.size(), 1, out.kept);
  out.features = ad::reshape(ad::gather_rows(features, rows), {out.kept.size(), features.dim(1)});
  return out;
}

GraphConvBlock::GraphConvBlock(ad::ParamStore& store, const std::string& name, std::size_t in_features,
                               std::size_t width, ad::PoolKind pool)
    : edge_mlp_(store, name + ".edge_mlp", {kEdgeGeometryWidth + in_features, width, width}), pool_(pool) {}

ad::Tensor GraphConvBlock::operator()(const BlockGeometry& geo, const ad::Tensor* in_features) const {
  ad::Tensor edges = geo.edges;
  if (in_features != nullptr) edges = ad::concat(edges, ad::gather_rows(*in_features, geo.neighbor_rows));
  return ad::pool(edge_mlp_(edges), pool_);
}

PlainConvBlock::PlainConvBlock(ad::ParamStore& store, const std::string& name, std::size_t in_features,
                               std::size_t width)
    : fc0_(store, name + ".fc0", 6 + in_features, width),
      fc1_(store, name + ".fc1", width, width),
      bn0_(store, name + ".bn0", width),
      bn1_(store, name + ".bn1", width) {}

ad::Tensor PlainConvBlock::operator()(const BlockGeometry& geo, const ad::Tensor* in_features, ad::Mode mode) const {
  ad::Tensor x = geo.center_attrs;
  if (in_features != nullptr) {
    const IndexMatrix rows(geo.carried.size(), 1, geo.carried);
    x = ad::concat(x, ad::reshape(ad::gather_rows(*in_features, rows), {geo.carried.size(), in_features->dim(1)}));
  }
  ad::Tensor h = ad::relu(bn0_(fc0_(x), mode));
  return ad::relu(bn1_(fc1_(h), mode));
}

Embedder::Embedder(ad::ParamStore& store, EmbedConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::size_t in = 0;
  for (std::size_t b = 0; b < cfg_.widths.size(); ++b) {
    const std::string name = "embed.block" + std::to_string(b);
    if (cfg_.block == BlockKind::gcn) {
      gcn_.emplace_back(store, name, in, cfg_.widths[b], cfg_.pool);
    } else {
      plain_.emplace_back(store, name, in, cfg_.widths[b]);
    }
    in = cfg_.widths[b];
  }
  pos_enc_ = Mlp(store, "pos_enc", {3, cfg_.d_in, cfg_.d_in});
}

ad::Tensor Embedder::operator()(const EmbedPlan& plan, ad::Mode mode, EmbedTrace* trace) const {
  if (plan.blocks.size() != cfg_.widths.size()) throw DimensionError("embed: plan was built for another config");
  ad::Tensor features;
  for (std::size_t b = 0; b < plan.blocks.size(); ++b) {
    const ad::Tensor* in = b == 0 ? nullptr : &features;
    features = cfg_.block == BlockKind::gcn ? gcn_[b](plan.blocks[b], in) : plain_[b](plan.blocks[b], in, mode);
  }
  ad::Tensor positional = positional_encoding(plan.centers);
  if (trace != nullptr) *trace = {features, positional};
  return ad::add(features, positional);
}

}  // namespace transpose::net
