#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "maskmatch/error.hpp"

namespace maskmatch {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& dims);

// Dense row-major float32 tensor. Construction from explicit data validates
// that the element count matches the shape and that every value is finite.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape dims);
  Tensor(Shape dims, std::vector<float> data);

  static Tensor filled(Shape dims, float value);

  const Shape& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t extent(std::size_t axis) const;
  bool empty() const noexcept { return data_.empty(); }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }
  const std::vector<float>& values() const noexcept { return data_; }

  float operator[](std::size_t i) const { return data_[i]; }
  float& operator[](std::size_t i) { return data_[i]; }

  // Same storage, new shape; element counts must agree.
  Tensor reshaped(Shape dims) const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape dims_;
  std::vector<float> data_;
};

// Boolean F x H x W grid. Rank-2 maps are promoted to a single frame.
class BinaryGrid {
 public:
  BinaryGrid() = default;
  BinaryGrid(std::size_t frames, std::size_t height, std::size_t width,
             bool value = false);
  BinaryGrid(std::size_t frames, std::size_t height, std::size_t width,
             std::vector<std::uint8_t> bits);

  std::size_t frames() const noexcept { return frames_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return bits_.size(); }
  Shape dims() const { return {frames_, height_, width_}; }

  bool at(std::size_t f, std::size_t y, std::size_t x) const {
    return bits_[(f * height_ + y) * width_ + x] != 0;
  }
  void set(std::size_t f, std::size_t y, std::size_t x, bool v) {
    bits_[(f * height_ + y) * width_ + x] = v ? 1 : 0;
  }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  std::size_t count() const;
  BinaryGrid frame(std::size_t f) const;
  BinaryGrid complement() const;
  Tensor to_tensor() const;

  bool operator==(const BinaryGrid& other) const = default;

 private:
  std::size_t frames_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Softmax of every 1-D slice along `axis`, max-subtracted.
Tensor softmax_rows(const Tensor& t, std::size_t axis);

// Half-pixel-centre bilinear resampling of a 2-D map (edge clamped).
Tensor resize_bilinear(const Tensor& map, std::size_t height, std::size_t width);

// Per-frame nearest-neighbour resampling of a binary grid.
BinaryGrid resize_nearest(const BinaryGrid& grid, std::size_t height,
                          std::size_t width);

// Affine map onto [0, 1]; a constant input maps to all zeros.
Tensor minmax_normalize(const Tensor& map);

// cell = 1 iff value >= tau. Accepts rank-2 (H, W) or rank-3 (F, H, W) maps.
BinaryGrid threshold_binarize(const Tensor& map, float tau);

// (1 - mask) * src + mask * edit with numpy-style broadcasting of `mask`.
Tensor masked_select(const Tensor& src, const Tensor& edit, const Tensor& mask);

// Slice along the leading axis.
Tensor take_leading(const Tensor& t, std::size_t index);

}  // namespace maskmatch
