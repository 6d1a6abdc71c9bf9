#pragma once

#include <cstdint>
#include <vector>

#include "cnv/tensor.hpp"
#include "cnv/workloads.hpp"

namespace cnv::testing {

// Nonzero values in [lo, hi] (lo < 0 < hi); zero with probability p_zero.
inline std::vector<Value> random_values(SplitMix64& rng, std::size_t n, double p_zero, int lo = -64,
                                        int hi = 64) {
  std::vector<Value> v(n);
  const auto span = static_cast<std::uint64_t>(hi - lo);
  for (auto& x : v) {
    const bool zero = rng.uniform01() < p_zero;
    int draw = lo + static_cast<int>(rng.next() % span);
    if (draw >= 0) ++draw;
    x = zero ? Value{0} : static_cast<Value>(draw);
  }
  return v;
}

inline ActTensor random_acts(SplitMix64& rng, Extent3 dims, double p_zero, std::size_t brick = 1) {
  ActTensor t(dims.x, dims.y, dims.depth, brick);
  for (std::size_t x = 0; x < dims.x; ++x) {
    for (std::size_t y = 0; y < dims.y; ++y) {
      const auto v = random_values(rng, dims.depth, p_zero);
      for (std::size_t i = 0; i < dims.depth; ++i) t(x, y, i) = v[i];
    }
  }
  return t;
}

inline FilterSet random_filters(SplitMix64& rng, std::size_t count, std::size_t fx, std::size_t fy,
                                std::size_t depth, double p_zero, std::size_t brick = 1) {
  FilterSet f(count, fx, fy, depth, brick);
  for (std::size_t n = 0; n < count; ++n) {
    for (std::size_t x = 0; x < fx; ++x) {
      for (std::size_t y = 0; y < fy; ++y) {
        const auto v = random_values(rng, depth, p_zero);
        for (std::size_t i = 0; i < depth; ++i) f(n, x, y, i) = v[i];
      }
    }
  }
  return f;
}

// Random layer that tiles exactly: window positions are chosen first, then
// the input size is derived from them.
inline Layer random_layer(SplitMix64& rng, std::size_t max_xy, std::size_t max_bricks,
                          std::size_t max_filters, std::size_t brick, double pa, double pw) {
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.next() % (hi - lo + 1));
  };
  Layer l;
  l.brick = brick;
  l.stride = pick(1, 2);
  const std::size_t fx = pick(1, std::min<std::size_t>(3, max_xy));
  const std::size_t fy = pick(1, std::min<std::size_t>(3, max_xy));
  const std::size_t ox = pick(1, (max_xy - fx) / l.stride + 1);
  const std::size_t oy = pick(1, (max_xy - fy) / l.stride + 1);
  const Extent3 in{(ox - 1) * l.stride + fx, (oy - 1) * l.stride + fy, pick(1, max_bricks) * brick};
  l.acts = random_acts(rng, in, pa, brick);
  l.filters = random_filters(rng, pick(1, max_filters), fx, fy, in.depth, pw, brick);
  return l;
}

}  // namespace cnv::testing
