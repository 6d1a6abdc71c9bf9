#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cnv/errors.hpp"

namespace cnv {

// 16-bit fixed-point sample; the binary point never matters since every check
// is integer-exact.
using Value = std::int16_t;
// Wide accumulator for partial sums and layer outputs.
using Accum = std::int64_t;

struct Extent3 {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t depth = 0;

  std::size_t volume() const { return x * y * depth; }
  bool operator==(const Extent3&) const = default;
};

std::string to_string(const Extent3& e);

inline std::size_t round_up(std::size_t n, std::size_t multiple) {
  return multiple == 0 ? n : (n + multiple - 1) / multiple * multiple;
}

// Dense (x, y, i) array with the feature index i varying fastest, so one
// (x, y) column is contiguous and every brick is a contiguous run.
//
// The stored depth may be larger than the logical depth: tensors that feed
// the brick-oriented models are zero-padded to a multiple of the brick size.
template <class T>
class Tensor3 {
 public:
  using value_type = T;

  Tensor3() = default;
  Tensor3(std::size_t x, std::size_t y, std::size_t depth, std::size_t depth_multiple = 1)
      : dims_{x, y, round_up(depth, depth_multiple)},
        logical_depth_(depth),
        values_(dims_.volume(), T{}) {}

  const Extent3& dims() const { return dims_; }
  std::size_t size_x() const { return dims_.x; }
  std::size_t size_y() const { return dims_.y; }
  std::size_t depth() const { return dims_.depth; }
  std::size_t logical_depth() const { return logical_depth_; }
  std::size_t size() const { return values_.size(); }

  std::size_t index(std::size_t x, std::size_t y, std::size_t i) const {
    return (x * dims_.y + y) * dims_.depth + i;
  }

  T& operator()(std::size_t x, std::size_t y, std::size_t i) { return values_[index(x, y, i)]; }
  const T& operator()(std::size_t x, std::size_t y, std::size_t i) const {
    return values_[index(x, y, i)];
  }

  T& at(std::size_t x, std::size_t y, std::size_t i) {
    check(x, y, i);
    return (*this)(x, y, i);
  }
  const T& at(std::size_t x, std::size_t y, std::size_t i) const {
    check(x, y, i);
    return (*this)(x, y, i);
  }

  std::span<const T> column(std::size_t x, std::size_t y) const {
    return {values_.data() + index(x, y, 0), dims_.depth};
  }
  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  bool operator==(const Tensor3&) const = default;

 private:
  void check(std::size_t x, std::size_t y, std::size_t i) const {
    if (x >= dims_.x || y >= dims_.y || i >= dims_.depth) {
      throw BoundsError("tensor coordinate out of range");
    }
  }

  Extent3 dims_;
  std::size_t logical_depth_ = 0;
  std::vector<T> values_;
};

using ActTensor = Tensor3<Value>;
using OutTensor = Tensor3<Accum>;

// F filters of identical (Fx, Fy, I) shape, each laid out like a Tensor3.
class FilterSet {
 public:
  FilterSet() = default;
  FilterSet(std::size_t count, std::size_t fx, std::size_t fy, std::size_t depth,
            std::size_t depth_multiple = 1);

  std::size_t count() const { return count_; }
  std::size_t size_x() const { return shape_.x; }
  std::size_t size_y() const { return shape_.y; }
  std::size_t depth() const { return shape_.depth; }
  std::size_t logical_depth() const { return logical_depth_; }
  const Extent3& shape() const { return shape_; }

  std::size_t index(std::size_t f, std::size_t x, std::size_t y, std::size_t i) const {
    return f * shape_.volume() + (x * shape_.y + y) * shape_.depth + i;
  }
  Value& operator()(std::size_t f, std::size_t x, std::size_t y, std::size_t i) {
    return values_[index(f, x, y, i)];
  }
  const Value& operator()(std::size_t f, std::size_t x, std::size_t y, std::size_t i) const {
    return values_[index(f, x, y, i)];
  }
  Value at(std::size_t f, std::size_t x, std::size_t y, std::size_t i) const;

  std::span<const Value> filter(std::size_t f) const {
    return {values_.data() + f * shape_.volume(), shape_.volume()};
  }
  std::span<Value> values() { return values_; }
  std::span<const Value> values() const { return values_; }

  bool operator==(const FilterSet&) const = default;

 private:
  std::size_t count_ = 0;
  Extent3 shape_;
  std::size_t logical_depth_ = 0;
  std::vector<Value> values_;
};

// Convolution geometry. No input padding; the stride must tile the input
// exactly in both spatial dimensions.
struct LayerConfig {
  Extent3 input;
  std::size_t filter_x = 1;
  std::size_t filter_y = 1;
  std::size_t filter_count = 1;
  std::size_t stride = 1;

  static LayerConfig of(const ActTensor& acts, const FilterSet& filters, std::size_t stride = 1);

  std::size_t out_x() const { return (input.x - filter_x) / stride + 1; }
  std::size_t out_y() const { return (input.y - filter_y) / stride + 1; }
  std::size_t windows() const { return out_x() * out_y(); }
  std::size_t window_volume() const { return filter_x * filter_y * input.depth; }

  // Throws ConfigError on any geometry violation.
  void validate() const;
  // Additionally requires the depth to be a whole number of bricks.
  void validate(std::size_t brick) const;
  void validate(const ActTensor& acts, const FilterSet& filters) const;
};

struct BrickCoord {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t i = 0;  // always a multiple of the brick size

  bool operator==(const BrickCoord&) const = default;
};

struct Brick {
  BrickCoord base;
  std::vector<Value> values;

  std::size_t size() const { return values.size(); }
  bool operator==(const Brick&) const = default;
};

Brick brick_at(const ActTensor& acts, std::size_t x, std::size_t y, std::size_t brick_index,
               std::size_t brick);

// Copies brick (x, y, brick_index) of any tensor into `out`, zero-filling
// positions at or beyond the stored depth.
template <class T>
void load_brick(const Tensor3<T>& t, std::size_t x, std::size_t y, std::size_t brick_index,
                std::span<T> out) {
  const std::size_t base = brick_index * out.size();
  const auto col = t.column(x, y);
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = base + j < col.size() ? col[base + j] : T{};
  }
}

// OpenMP-parallel over output positions.
OutTensor dense_conv(const ActTensor& acts, const FilterSet& filters, const LayerConfig& layer);
// Serial loop nest; kept as the reference the parallel kernel is tested against.
OutTensor dense_conv_reference(const ActTensor& acts, const FilterSet& filters,
                               const LayerConfig& layer);

// A brick position relative to the window origin.
struct WindowBrick {
  std::size_t fx = 0;
  std::size_t fy = 0;
  std::size_t brick_index = 0;

  bool operator==(const WindowBrick&) const = default;
};

// Brick-interleaved lane assignment of one window. Window bricks are visited
// x outermost, then y, then depth; brick k goes to lane k mod lanes. The
// assignment is identical for every window of a layer.
struct SliceAssignment {
  std::vector<std::vector<WindowBrick>> lanes;

  std::size_t max_bricks_per_lane() const;
  std::size_t total_bricks() const;
};

SliceAssignment slice_window(const LayerConfig& layer, std::size_t lanes, std::size_t brick);

struct WindowSlices {
  std::size_t wx = 0;
  std::size_t wy = 0;
  std::vector<std::vector<BrickCoord>> lanes;
};

// Absolute brick coordinates per lane for every output window, windows in
// row order (wy outer, wx inner).
std::vector<WindowSlices> window_slices(const LayerConfig& layer, std::size_t lanes,
                                        std::size_t brick);

}  // namespace cnv
