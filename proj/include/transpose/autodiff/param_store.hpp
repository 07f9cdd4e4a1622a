#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "transpose/autodiff/tensor.hpp"

namespace transpose::ad {

enum class Init { glorot_uniform, zeros, ones };

/// Named, ordered collection of trainable tensors plus non-trainable buffers
/// (e.g. batch-norm running statistics). Iteration order is lexicographic by
/// name, which fixes checkpoint layout and optimizer update order.
class ParamStore {
 public:
  struct Entry {
    Tensor tensor;
    bool trainable = true;
  };

  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Creates a trainable parameter. Glorot init draws uniformly from
  /// +-sqrt(6 / (fan_in + fan_out)) with an RNG keyed by (seed, name), so the
  /// values depend only on the seed, the name and the shape.
  Tensor create(const std::string& name, Shape shape, Init init = Init::glorot_uniform);
  Tensor create_constant(const std::string& name, Shape shape, std::vector<double> values);
  /// Non-trainable state saved with checkpoints.
  Tensor create_buffer(const std::string& name, Shape shape, double fill);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const Tensor& at(const std::string& name) const;
  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::vector<std::string> names(const std::string& prefix = "") const;
  std::size_t size() const { return entries_.size(); }

  void zero_grad();
  /// Releases gradient buffers entirely (so "missing gradient" is detectable).
  void clear_grad();

  // Flat little-endian checkpoint: "GPCK", u32 version, then per entry
  // u32 name length, name bytes, u32 rank, u64 extents, f64 payload.
  void write(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  /// Overwrites values of existing entries; every entry must be present in the
  /// stream with a matching shape and no unknown records may appear.
  void read(std::istream& in);
  void load(const std::filesystem::path& path);

  /// Bitwise equality of names, shapes and values.
  bool identical(const ParamStore& other) const;

 private:
  Tensor& insert(const std::string& name, Tensor tensor, bool trainable);

  std::uint64_t seed_;
  std::map<std::string, Entry> entries_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace transpose::ad
