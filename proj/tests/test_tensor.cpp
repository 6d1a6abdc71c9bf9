#include <gtest/gtest.h>

#include <set>
#include <tuple>

#include "cnv/tensor.hpp"
#include "support.hpp"

namespace cnv {
namespace {

// Naive convolution written directly from the definition, sharing no code
// with the library kernels.
std::vector<long long> naive_conv(const ActTensor& a, const FilterSet& w, std::size_t stride) {
  const std::size_t ox = (a.size_x() - w.size_x()) / stride + 1;
  const std::size_t oy = (a.size_y() - w.size_y()) / stride + 1;
  std::vector<long long> out(ox * oy * w.count(), 0);
  for (std::size_t wx = 0; wx < ox; ++wx)
    for (std::size_t wy = 0; wy < oy; ++wy)
      for (std::size_t f = 0; f < w.count(); ++f) {
        long long s = 0;
        for (std::size_t x = 0; x < w.size_x(); ++x)
          for (std::size_t y = 0; y < w.size_y(); ++y)
            for (std::size_t i = 0; i < a.depth(); ++i)
              s += static_cast<long long>(a.at(wx * stride + x, wy * stride + y, i)) * w.at(f, x, y, i);
        out[(wx * oy + wy) * w.count() + f] = s;
      }
  return out;
}

std::vector<long long> flatten(const OutTensor& t) { return {t.values().begin(), t.values().end()}; }

TEST(DenseConv, DotProductOfSingleColumn) {
  ActTensor a(1, 1, 4);
  FilterSet w(1, 1, 1, 4);
  const Value av[] = {1, 2, 0, 4};
  for (std::size_t i = 0; i < 4; ++i) {
    a(0, 0, i) = av[i];
    w(0, 0, 0, i) = 1;
  }
  const auto out = dense_conv(a, w, LayerConfig::of(a, w));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out(0, 0, 0), 7);
}

TEST(DenseConv, AllZeroFilterGivesZeroOutput) {
  SplitMix64 rng(5);
  const auto a = testing::random_acts(rng, {5, 5, 8}, 0.2);
  FilterSet w(3, 2, 2, 8);
  const auto out = dense_conv(a, w, LayerConfig::of(a, w));
  for (auto v : out.values()) EXPECT_EQ(v, 0);
}

TEST(DenseConv, MatchesNaiveOracle) {
  SplitMix64 rng(11);
  const auto a = testing::random_acts(rng, {6, 6, 16}, 0.3, 1);
  const auto w = testing::random_filters(rng, 4, 3, 3, 16, 0.1);
  const auto layer = LayerConfig::of(a, w);
  EXPECT_EQ(flatten(dense_conv(a, w, layer)), naive_conv(a, w, 1));
  EXPECT_EQ(flatten(dense_conv_reference(a, w, layer)), naive_conv(a, w, 1));
}

TEST(DenseConv, MatchesNaiveOracleOnRandomLayers) {
  SplitMix64 rng(12);
  for (int trial = 0; trial < 40; ++trial) {
    const auto l = testing::random_layer(rng, 9, 3, 6, 4, 0.4, 0.2);
    const auto cfg = l.config();
    const auto expected = naive_conv(l.acts, l.filters, l.stride);
    ASSERT_EQ(flatten(dense_conv(l.acts, l.filters, cfg)), expected) << "trial " << trial;
    ASSERT_EQ(flatten(dense_conv_reference(l.acts, l.filters, cfg)), expected) << "trial " << trial;
  }
}

TEST(DenseConv, LinearInActivations) {
  SplitMix64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = testing::random_acts(rng, {5, 4, 12}, 0.3);
    const auto b = testing::random_acts(rng, {5, 4, 12}, 0.3);
    const auto w = testing::random_filters(rng, 3, 2, 3, 12, 0.2);
    ActTensor sum = a;
    for (std::size_t k = 0; k < sum.size(); ++k) sum.values()[k] = static_cast<Value>(a.values()[k] + b.values()[k]);
    const auto layer = LayerConfig::of(a, w);
    const auto oa = dense_conv(a, w, layer);
    const auto ob = dense_conv(b, w, layer);
    const auto os = dense_conv(sum, w, layer);
    for (std::size_t k = 0; k < os.size(); ++k) {
      ASSERT_EQ(os.values()[k], oa.values()[k] + ob.values()[k]);
    }
  }
}

TEST(DenseConv, WideAccumulationDoesNotSaturate) {
  ActTensor a(1, 1, 64);
  FilterSet w(1, 1, 1, 64);
  for (std::size_t i = 0; i < 64; ++i) {
    a(0, 0, i) = -32768;
    w(0, 0, 0, i) = -32768;
  }
  EXPECT_EQ(dense_conv(a, w, LayerConfig::of(a, w))(0, 0, 0), 64LL * 32768 * 32768);
}

TEST(LayerConfig, RejectsBadGeometry) {
  ActTensor a(4, 4, 16);
  EXPECT_THROW(LayerConfig::of(a, FilterSet(0, 1, 1, 16)).validate(), ConfigError);
  EXPECT_THROW(LayerConfig::of(a, FilterSet(1, 5, 1, 16)).validate(), ConfigError);
  EXPECT_THROW(LayerConfig::of(a, FilterSet(1, 3, 3, 16), 2).validate(), ConfigError);
  EXPECT_THROW(LayerConfig::of(a, FilterSet(1, 1, 1, 16), 0).validate(), ConfigError);
  EXPECT_NO_THROW(LayerConfig::of(a, FilterSet(1, 2, 2, 16), 2).validate());
  EXPECT_THROW(LayerConfig::of(a, FilterSet(1, 1, 1, 16)).validate(3), ConfigError);
  const auto cfg = LayerConfig::of(a, FilterSet(1, 1, 1, 16));
  EXPECT_THROW(cfg.validate(a, FilterSet(1, 1, 1, 8)), ConfigError);
  EXPECT_THROW(dense_conv(a, FilterSet(1, 1, 1, 8), cfg), ConfigError);
}

TEST(Tensor, DepthIsPaddedToMultiple) {
  ActTensor a(2, 2, 5, 4);
  EXPECT_EQ(a.depth(), 8u);
  EXPECT_EQ(a.logical_depth(), 5u);
  EXPECT_EQ(a(1, 1, 7), 0);
  EXPECT_THROW(a.at(0, 0, 8), BoundsError);
  EXPECT_THROW(a.at(2, 0, 0), BoundsError);
}

TEST(BrickAt, CopiesAlignedValues) {
  ActTensor a(1, 1, 4);
  const Value v[] = {1, 2, 0, 4};
  for (std::size_t i = 0; i < 4; ++i) a(0, 0, i) = v[i];
  const Brick b = brick_at(a, 0, 0, 0, 4);
  EXPECT_EQ(b.base, (BrickCoord{0, 0, 0}));
  EXPECT_EQ(b.values, (std::vector<Value>{1, 2, 0, 4}));
}

TEST(BrickAt, IndexPastDepthIsBoundsError) {
  ActTensor a(2, 2, 8);
  EXPECT_THROW(brick_at(a, 0, 0, 2, 4), BoundsError);
  EXPECT_THROW(brick_at(a, 2, 0, 0, 4), BoundsError);
}

TEST(BrickAt, SecondBrickStartsAtBrickSize) {
  ActTensor a(1, 1, 32);
  for (std::size_t i = 0; i < 32; ++i) a(0, 0, i) = static_cast<Value>(i);
  const Brick b = brick_at(a, 0, 0, 1, 16);
  EXPECT_EQ(b.base.i, 16u);
  for (std::size_t j = 0; j < 16; ++j) EXPECT_EQ(b.values[j], static_cast<Value>(16 + j));
}

LayerConfig layer_of(Extent3 in, std::size_t fx, std::size_t fy, std::size_t stride = 1) {
  LayerConfig l;
  l.input = in;
  l.filter_x = fx;
  l.filter_y = fy;
  l.stride = stride;
  return l;
}

TEST(WindowSlices, SixteenBricksOnePerLane) {
  const auto s = slice_window(layer_of({4, 4, 64}, 2, 2), 16, 16);
  ASSERT_EQ(s.lanes.size(), 16u);
  for (const auto& lane : s.lanes) EXPECT_EQ(lane.size(), 1u);
}

TEST(WindowSlices, NextLaneTakesNextBrickOfSameColumn) {
  const auto s = slice_window(layer_of({4, 4, 64}, 2, 2), 16, 16);
  EXPECT_EQ(s.lanes[0][0], (WindowBrick{0, 0, 0}));
  EXPECT_EQ(s.lanes[1][0], (WindowBrick{0, 0, 1}));
}

TEST(WindowSlices, EighteenBricksRoundRobin) {
  const auto s = slice_window(layer_of({8, 8, 32}, 3, 3), 16, 16);
  EXPECT_EQ(s.total_bricks(), 18u);
  EXPECT_EQ(s.max_bricks_per_lane(), 2u);
  EXPECT_EQ(s.lanes[0].size(), 2u);
  EXPECT_EQ(s.lanes[1].size(), 2u);
  for (std::size_t l = 2; l < 16; ++l) EXPECT_EQ(s.lanes[l].size(), 1u);
}

TEST(WindowSlices, PartitionOfWindowBricks) {
  for (std::size_t lanes : {1u, 3u, 7u, 16u, 40u}) {
    const auto layer = layer_of({7, 6, 48}, 3, 2, 2);
    for (const auto& w : window_slices(layer, lanes, 16)) {
      std::set<std::tuple<std::size_t, std::size_t, std::size_t>> seen;
      std::size_t n = 0;
      for (const auto& lane : w.lanes) {
        for (const auto& c : lane) {
          seen.insert({c.x, c.y, c.i});
          ++n;
        }
      }
      ASSERT_EQ(n, seen.size()) << "brick assigned twice";
      std::set<std::tuple<std::size_t, std::size_t, std::size_t>> expected;
      for (std::size_t fx = 0; fx < 3; ++fx)
        for (std::size_t fy = 0; fy < 2; ++fy)
          for (std::size_t i = 0; i < 48; i += 16) expected.insert({w.wx * 2 + fx, w.wy * 2 + fy, i});
      ASSERT_EQ(seen, expected);
    }
  }
}

}  // namespace
}  // namespace cnv
