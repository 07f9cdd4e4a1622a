#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace transpose {

using IndexList = std::vector<std::size_t>;

/// Dense row-major rows x cols table of point indices (K-NN neighborhoods).
class IndexMatrix {
 public:
  IndexMatrix() = default;
  IndexMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0) {}
  IndexMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::size_t& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  std::size_t operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const std::size_t> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  const std::vector<std::size_t>& data() const { return data_; }

  bool operator==(const IndexMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> data_;
};

}  // namespace transpose
