#include "cnv/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace cnv {

std::string to_string(const Extent3& e) {
  std::ostringstream os;
  os << e.x << 'x' << e.y << 'x' << e.depth;
  return os.str();
}

FilterSet::FilterSet(std::size_t count, std::size_t fx, std::size_t fy, std::size_t depth,
                     std::size_t depth_multiple)
    : count_(count),
      shape_{fx, fy, round_up(depth, depth_multiple)},
      logical_depth_(depth),
      values_(count * shape_.volume(), Value{0}) {}

Value FilterSet::at(std::size_t f, std::size_t x, std::size_t y, std::size_t i) const {
  if (f >= count_ || x >= shape_.x || y >= shape_.y || i >= shape_.depth) {
    throw BoundsError("filter coordinate out of range");
  }
  return (*this)(f, x, y, i);
}

LayerConfig LayerConfig::of(const ActTensor& acts, const FilterSet& filters, std::size_t stride) {
  LayerConfig layer;
  layer.input = acts.dims();
  layer.filter_x = filters.size_x();
  layer.filter_y = filters.size_y();
  layer.filter_count = filters.count();
  layer.stride = stride;
  return layer;
}

void LayerConfig::validate() const {
  if (input.x == 0 || input.y == 0 || input.depth == 0) {
    throw ConfigError("input tensor has an empty dimension: " + to_string(input));
  }
  if (filter_count == 0) throw ConfigError("filter set is empty");
  if (filter_x == 0 || filter_y == 0) throw ConfigError("filter has an empty spatial dimension");
  if (stride == 0) throw ConfigError("stride must be positive");
  if (filter_x > input.x || filter_y > input.y) {
    throw ConfigError("filter is larger than the input");
  }
  if ((input.x - filter_x) % stride != 0 || (input.y - filter_y) % stride != 0) {
    throw ConfigError("stride does not tile the input exactly");
  }
}

void LayerConfig::validate(std::size_t brick) const {
  validate();
  if (brick == 0) throw ConfigError("brick size must be positive");
  if (input.depth % brick != 0) {
    throw ConfigError("input depth " + std::to_string(input.depth) +
                      " is not a multiple of the brick size " + std::to_string(brick));
  }
}

void LayerConfig::validate(const ActTensor& acts, const FilterSet& filters) const {
  validate();
  if (acts.dims() != input) throw ConfigError("activation tensor does not match layer input");
  if (filters.count() != filter_count || filters.size_x() != filter_x ||
      filters.size_y() != filter_y) {
    throw ConfigError("filter set does not match layer filter geometry");
  }
  if (filters.depth() != input.depth) {
    throw ConfigError("filter depth " + std::to_string(filters.depth()) +
                      " differs from input depth " + std::to_string(input.depth));
  }
}

Brick brick_at(const ActTensor& acts, std::size_t x, std::size_t y, std::size_t brick_index,
               std::size_t brick) {
  if (brick == 0) throw ConfigError("brick size must be positive");
  if (x >= acts.size_x() || y >= acts.size_y() || (brick_index + 1) * brick > acts.depth()) {
    throw BoundsError("brick coordinate out of range");
  }
  Brick b;
  b.base = {x, y, brick_index * brick};
  const auto col = acts.column(x, y).subspan(b.base.i, brick);
  b.values.assign(col.begin(), col.end());
  return b;
}

namespace {

Accum window_dot(const ActTensor& acts, const FilterSet& filters, std::size_t f, std::size_t ox,
                 std::size_t oy, std::size_t stride) {
  const std::size_t depth = acts.depth();
  Accum sum = 0;
  for (std::size_t fx = 0; fx < filters.size_x(); ++fx) {
    for (std::size_t fy = 0; fy < filters.size_y(); ++fy) {
      const Value* a = &acts(ox * stride + fx, oy * stride + fy, 0);
      const Value* w = &filters(f, fx, fy, 0);
      for (std::size_t i = 0; i < depth; ++i) {
        sum += static_cast<Accum>(a[i]) * static_cast<Accum>(w[i]);
      }
    }
  }
  return sum;
}

}  // namespace

OutTensor dense_conv(const ActTensor& acts, const FilterSet& filters, const LayerConfig& layer) {
  layer.validate(acts, filters);
  const std::size_t ox = layer.out_x();
  const std::size_t oy = layer.out_y();
  const std::size_t nf = layer.filter_count;
  OutTensor out(ox, oy, nf);
  const auto total = static_cast<std::int64_t>(ox * oy);

#pragma omp parallel for schedule(static)
  for (std::int64_t w = 0; w < total; ++w) {
    const auto x = static_cast<std::size_t>(w) / oy;
    const auto y = static_cast<std::size_t>(w) % oy;
    for (std::size_t f = 0; f < nf; ++f) {
      out(x, y, f) = window_dot(acts, filters, f, x, y, layer.stride);
    }
  }
  return out;
}

OutTensor dense_conv_reference(const ActTensor& acts, const FilterSet& filters,
                               const LayerConfig& layer) {
  layer.validate(acts, filters);
  OutTensor out(layer.out_x(), layer.out_y(), layer.filter_count);
  for (std::size_t x = 0; x < layer.out_x(); ++x) {
    for (std::size_t y = 0; y < layer.out_y(); ++y) {
      for (std::size_t f = 0; f < layer.filter_count; ++f) {
        out(x, y, f) = window_dot(acts, filters, f, x, y, layer.stride);
      }
    }
  }
  return out;
}

std::size_t SliceAssignment::max_bricks_per_lane() const {
  std::size_t m = 0;
  for (const auto& l : lanes) m = std::max(m, l.size());
  return m;
}

std::size_t SliceAssignment::total_bricks() const {
  std::size_t n = 0;
  for (const auto& l : lanes) n += l.size();
  return n;
}

SliceAssignment slice_window(const LayerConfig& layer, std::size_t lanes, std::size_t brick) {
  if (lanes == 0) throw ConfigError("lane count must be positive");
  if (brick == 0) throw ConfigError("brick size must be positive");
  SliceAssignment s;
  s.lanes.resize(lanes);
  const std::size_t per_column = (layer.input.depth + brick - 1) / brick;
  std::size_t k = 0;
  for (std::size_t fx = 0; fx < layer.filter_x; ++fx) {
    for (std::size_t fy = 0; fy < layer.filter_y; ++fy) {
      for (std::size_t ib = 0; ib < per_column; ++ib, ++k) {
        s.lanes[k % lanes].push_back({fx, fy, ib});
      }
    }
  }
  return s;
}

std::vector<WindowSlices> window_slices(const LayerConfig& layer, std::size_t lanes,
                                        std::size_t brick) {
  layer.validate();
  const SliceAssignment rel = slice_window(layer, lanes, brick);
  std::vector<WindowSlices> out;
  out.reserve(layer.windows());
  for (std::size_t wy = 0; wy < layer.out_y(); ++wy) {
    for (std::size_t wx = 0; wx < layer.out_x(); ++wx) {
      WindowSlices w{wx, wy, {}};
      w.lanes.resize(lanes);
      for (std::size_t l = 0; l < lanes; ++l) {
        for (const auto& b : rel.lanes[l]) {
          w.lanes[l].push_back(
              {wx * layer.stride + b.fx, wy * layer.stride + b.fy, b.brick_index * brick});
        }
      }
      out.push_back(std::move(w));
    }
  }
  return out;
}

}  // namespace cnv
