#pragma once

#include <cstdint>
#include <vector>

#include "transpose/autodiff/ops.hpp"
#include "transpose/geometry.hpp"
#include "transpose/net/layers.hpp"

namespace transpose::net {

enum class BlockKind { gcn, plainconv };

/// Hierarchical local feature extractor: FPS to `initial_centers`, then one
/// block per entry of `widths`, with an FPS downsampling step between
/// consecutive blocks.
struct EmbedConfig {
  std::size_t initial_centers = 64;
  std::vector<std::size_t> k_neighbors{16, 8};
  std::vector<std::size_t> widths{64, 64};
  /// One factor per gap between blocks.
  std::vector<std::size_t> downsample{2};
  std::size_t d_in = 64;
  ad::PoolKind pool = ad::PoolKind::max;
  BlockKind block = BlockKind::gcn;
  /// Whether a center counts as its own neighbor.
  bool include_self = false;
  std::uint64_t fps_seed = 0;

  void validate() const;
  std::size_t centers_at(std::size_t block) const;
  std::size_t final_centers() const { return centers_at(widths.size() - 1); }
};

inline constexpr std::size_t kPpfWidth = 4;
inline constexpr std::size_t kEdgeGeometryWidth = kPpfWidth + 3;

/// Non-learned inputs of one block: its centers and their neighborhoods.
struct BlockGeometry {
  /// Rows of the previous block's output that survive as this block's
  /// centers (empty for the first block, whose centers index the cloud).
  IndexList carried;
  /// Neighbor rows of the previous block's output, [centers, k]; for the
  /// first block these index the input cloud and are used for geometry only.
  IndexMatrix neighbor_rows;
  /// [centers, k, 7]: PPF(center, neighbor) followed by the neighbor offset.
  ad::Tensor edges;
  /// [centers, 6]: position and normal of each center.
  ad::Tensor center_attrs;
};

/// Everything the embedding needs that does not depend on weights. Positions
/// are expressed relative to the cloud barycenter and multiplied by
/// `length_scale`, so a fixed plan can be reused across training steps.
struct EmbedPlan {
  std::vector<BlockGeometry> blocks;
  /// [N, 3] final centers (barycentric, scaled).
  ad::Tensor centers;
  geom::Vec3 barycenter = geom::Vec3::Zero();
  double length_scale = 1.0;

  /// The same plan for the cloud rotated by R about its barycenter. Point
  /// pair features are unchanged; offsets, positions and normals rotate.
  EmbedPlan rotated(const geom::Mat3& R) const;
};

/// Builds the geometry of one block. `centers` index `points`, neighbors are
/// drawn from `points`, and `neighbor_rows` index `points`.
BlockGeometry block_geometry(const geom::PointCloud& points, const geom::NormalField& normals,
                             const IndexList& centers, std::size_t k, bool include_self);

EmbedPlan make_plan(const geom::PointCloud& cloud, const geom::NormalField& normals, const EmbedConfig& cfg,
                    double length_scale);

struct Downsampled {
  IndexList kept;
  geom::PointCloud centers;
  ad::Tensor features;
};

/// FPS over the current centers keeping ceil(N / factor) of them, in FPS
/// order, with their feature rows.
Downsampled fps_downsample(const geom::PointCloud& centers, const ad::Tensor& features, std::size_t factor,
                           std::uint64_t seed = 0);

/// Edge MLP followed by pooling over each neighborhood.
class GraphConvBlock {
 public:
  GraphConvBlock() = default;
  GraphConvBlock(ad::ParamStore& store, const std::string& name, std::size_t in_features, std::size_t width,
                 ad::PoolKind pool);

  /// `in_features`: previous block output ([rows, in]), or null for the first
  /// block. Returns [centers, width].
  ad::Tensor operator()(const BlockGeometry& geo, const ad::Tensor* in_features) const;

 private:
  Mlp edge_mlp_;
  ad::PoolKind pool_ = ad::PoolKind::max;
};

/// Ablation stand-in: per-center Linear-BatchNorm-ReLU twice on the center's
/// own position, normal and carried feature, with no neighborhood.
class PlainConvBlock {
 public:
  PlainConvBlock() = default;
  PlainConvBlock(ad::ParamStore& store, const std::string& name, std::size_t in_features, std::size_t width);

  ad::Tensor operator()(const BlockGeometry& geo, const ad::Tensor* in_features, ad::Mode mode) const;

 private:
  Linear fc0_, fc1_;
  BatchNorm bn0_, bn1_;
};

struct EmbedTrace {
  ad::Tensor geometric;   // F_geo, [N, d_in]
  ad::Tensor positional;  // [N, d_in]
};

/// Local feature embedding: geometric features of the final centers plus a
/// learned encoding of their positions. Parameters: "embed.*", "pos_enc.*".
class Embedder {
 public:
  Embedder() = default;
  Embedder(ad::ParamStore& store, EmbedConfig cfg);

  const EmbedConfig& config() const { return cfg_; }

  /// [N, d_in]. `trace`, when given, receives the two summands.
  ad::Tensor operator()(const EmbedPlan& plan, ad::Mode mode, EmbedTrace* trace = nullptr) const;

  /// Positional MLP 3 -> d_in -> d_in on [N, 3] centers.
  ad::Tensor positional_encoding(const ad::Tensor& centers) const { return pos_enc_(centers); }

 private:
  EmbedConfig cfg_;
  std::vector<GraphConvBlock> gcn_;
  std::vector<PlainConvBlock> plain_;
  Mlp pos_enc_;
};

}  // namespace transpose::net
