#include "transpose/autodiff/param_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "transpose/errors.hpp"
#include "transpose/util/atomic_file.hpp"
#include "transpose/util/rng.hpp"

namespace transpose::ad {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw DataError(std::string("checkpoint: truncated while reading ") + what);
  }
  return value;
}

}  // namespace

Tensor& ParamStore::insert(const std::string& name, Tensor tensor, bool trainable) {
  if (contains(name)) throw ConfigError("parameter '" + name + "' registered twice");
  tensor.set_requires_grad(trainable);
  auto [it, ok] = entries_.emplace(name, Entry{std::move(tensor), trainable});
  return it->second.tensor;
}

Tensor ParamStore::create(const std::string& name, Shape shape, Init init) {
  Tensor t(shape, 0.0);
  switch (init) {
    case Init::zeros:
      break;
    case Init::ones:
      std::fill(t.mutable_data().begin(), t.mutable_data().end(), 1.0);
      break;
    case Init::glorot_uniform: {
      const double fan_in = shape.size() >= 2 ? static_cast<double>(shape[shape.size() - 2]) : 1.0;
      const double fan_out = shape.empty() ? 1.0 : static_cast<double>(shape.back());
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      std::mt19937_64 rng(util::mix_seed(seed_, util::hash_string(name)));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (double& v : t.mutable_data()) v = dist(rng);
      break;
    }
  }
  return insert(name, std::move(t), true);
}

Tensor ParamStore::create_constant(const std::string& name, Shape shape, std::vector<double> values) {
  return insert(name, Tensor(std::move(shape), std::move(values)), true);
}

Tensor ParamStore::create_buffer(const std::string& name, Shape shape, double fill) {
  return insert(name, Tensor(std::move(shape), fill), false);
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw StateError("unknown parameter '" + name + "'");
  return it->second.tensor;
}

std::vector<std::string> ParamStore::names(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [name, entry] : entries_) {
    if (name.compare(0, prefix.size(), prefix) == 0) out.push_back(name);
  }
  return out;
}

void ParamStore::zero_grad() {
  for (auto& [name, entry] : entries_) entry.tensor.zero_grad();
}

void ParamStore::clear_grad() {
  for (auto& [name, entry] : entries_) entry.tensor.clear_grad();
}

void ParamStore::write(std::ostream& out) const {
  out.write("GPCK", 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  for (const auto& [name, entry] : entries_) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const Shape& shape = entry.tensor.shape();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t extent : shape) put<std::uint64_t>(out, extent);
    for (double v : entry.tensor.data()) put<double>(out, v);
  }
}

void ParamStore::save(const std::filesystem::path& path) const {
  util::write_atomically(path, [this](std::ostream& out) { write(out); });
}

void ParamStore::read(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "GPCK", 4) != 0) throw DataError("checkpoint: bad magic bytes");
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));

  std::map<std::string, bool> seen;
  while (in.peek() != std::char_traits<char>::eof()) {
    const auto name_len = get<std::uint32_t>(in, "name length");
    if (name_len > 4096) throw DataError("checkpoint: implausible name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw DataError("checkpoint: truncated name");
    const auto rank = get<std::uint32_t>(in, "rank");
    if (rank > 8) throw DataError("checkpoint: implausible rank for '" + name + "'");
    Shape shape(rank);
    for (auto& extent : shape) extent = static_cast<std::size_t>(get<std::uint64_t>(in, "extent"));

    auto it = entries_.find(name);
    if (it == entries_.end()) throw DataError("checkpoint: unexpected parameter '" + name + "'");
    if (it->second.tensor.shape() != shape) {
      throw DataError("checkpoint: shape mismatch for '" + name + "': file " + to_string(shape) + ", model " +
                      to_string(it->second.tensor.shape()));
    }
    auto dst = it->second.tensor.mutable_data();
    for (double& v : dst) v = get<double>(in, "payload");
    seen[name] = true;
  }
  for (const auto& [name, entry] : entries_) {
    if (!seen.count(name)) throw DataError("checkpoint: missing parameter '" + name + "'");
  }
}

void ParamStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  read(in);
}

bool ParamStore::identical(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  for (; a != entries_.end(); ++a, ++b) {
    if (a->first != b->first || a->second.tensor.shape() != b->second.tensor.shape()) return false;
    const auto x = a->second.tensor.data();
    const auto y = b->second.tensor.data();
    if (std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace transpose::ad
