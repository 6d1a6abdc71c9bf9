#include <gtest/gtest.h>

#include <sstream>

#include "cnv/dispatch.hpp"
#include "support.hpp"

namespace cnv {
namespace {

using V = std::vector<Value>;

ActTensor column(const V& v) {
  ActTensor a(1, 1, v.size());
  for (std::size_t i = 0; i < v.size(); ++i) a(0, 0, i) = v[i];
  return a;
}

DispatchConfig config(std::size_t lanes, std::size_t brick,
                      SyncPolicy policy = SyncPolicy::BricksetLockstep) {
  DispatchConfig c;
  c.lanes = lanes;
  c.brick = brick;
  c.policy = policy;
  c.banks = BankLayout::one_per_lane(lanes);
  return c;
}

std::string trace_text(const DispatchRun& run) {
  std::ostringstream os;
  write_trace(os, run.events);
  return os.str();
}

TEST(StreamBrick, LeadingOneOrder) {
  EXPECT_EQ(stream_brick(V{1, 0, 0, 4}, IneffCriterion::zero()),
            (std::vector<OffsetValue>{{0b00, 1}, {0b11, 4}}));
  EXPECT_TRUE(stream_brick(V{0, 0, 0, 0}, IneffCriterion::zero()).empty());
}

TEST(StreamBrick, ReconstructsEffectiveBrick) {
  SplitMix64 rng(41);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t B = 1 + rng.next() % 64;
    const auto b = testing::random_values(rng, B, rng.uniform01());
    const auto crit = IneffCriterion::abs_threshold(static_cast<std::uint16_t>(rng.next() % 30));
    const auto pairs = stream_brick(b, crit);
    V rebuilt(B, 0);
    unsigned last = 0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      if (k > 0) ASSERT_GT(pairs[k].offset, last);
      last = pairs[k].offset;
      rebuilt[pairs[k].offset] = pairs[k].value;
    }
    V want = b;
    for (auto& x : want) {
      if (crit.ineffectual(x)) x = 0;
    }
    ASSERT_EQ(rebuilt, want);
    ASSERT_EQ(pairs.size(), effectual_mask(std::span<const Value>(b), crit).count());
  }
}

TEST(StreamBrickWeightAware, Examples) {
  const V b{1, 2, 0, 4};
  EXPECT_EQ(stream_brick_weightaware(b, IneffCriterion::zero(), IsProduct(4)),
            stream_brick(b, IneffCriterion::zero()));
  EXPECT_TRUE(stream_brick_weightaware(b, IneffCriterion::zero(), IsProduct::ones(4)).empty());
  // Three effectual values, one facing ineffectual weights in every filter.
  EXPECT_EQ(stream_brick_weightaware(V{4, 6, 0, 8}, IneffCriterion::zero(), IsProduct::from_string("0100")),
            (std::vector<OffsetValue>{{0, 4}, {3, 8}}));
}

TEST(Dispatch, GoldenTraceSingleBrick) {
  const auto a = column({1, 0, 0, 4});
  const auto run = run_dispatch(DetectOnFetch{&a, IneffCriterion::zero()}, LayerConfig::of(a, FilterSet(1, 1, 1, 4)),
                                config(1, 4));
  EXPECT_EQ(trace_text(run), "0,0,0,1\n1,0,3,4\n");
  EXPECT_EQ(run.cycles, 2u);
  EXPECT_EQ(run.broadcasts, 2u);
}

TEST(Dispatch, LockstepLaneIdlesWhileOtherDrains) {
  const auto a = column({1, 2, 3, 4, 0, 0, 0, 0});
  const auto layer = LayerConfig::of(a, FilterSet(1, 1, 1, 8));
  const auto run = run_dispatch(DetectOnFetch{&a, IneffCriterion::zero()}, layer, config(2, 4));
  EXPECT_EQ(trace_text(run),
            "0,0,0,1\n0,1,IDLE\n"
            "1,0,1,2\n1,1,IDLE\n"
            "2,0,2,3\n2,1,IDLE\n"
            "3,0,3,4\n3,1,IDLE\n");
  EXPECT_EQ(run.cycles, 4u);
  EXPECT_EQ(run.lane_busy, (std::vector<std::uint64_t>{4, 0}));
}

TEST(Dispatch, EmptyBrickOneCycleDrain) {
  const auto a = column({0, 0, 0, 0, 0, 0, 0, 0});
  const auto layer = LayerConfig::of(a, FilterSet(1, 1, 1, 8));
  auto cfg = config(2, 4);
  EXPECT_EQ(run_dispatch(DetectOnFetch{&a, IneffCriterion::zero()}, layer, cfg).cycles, 0u);
  cfg.empty_cost = EmptyBrickCost::OneCycle;
  const auto run = run_dispatch(DetectOnFetch{&a, IneffCriterion::zero()}, layer, cfg);
  EXPECT_EQ(run.cycles, 1u);
  EXPECT_EQ(trace_text(run), "0,0,IDLE\n0,1,IDLE\n");
  cfg.policy = SyncPolicy::WindowSync;
  EXPECT_EQ(run_dispatch(DetectOnFetch{&a, IneffCriterion::zero()}, layer, cfg).cycles, 1u);
}

TEST(Dispatch, DenseWindowEveryLaneBusyEveryCycle) {
  SplitMix64 rng(42);
  const auto a = testing::random_acts(rng, {1, 1, 64}, 0.0);
  const auto layer = LayerConfig::of(a, FilterSet(1, 1, 1, 64));
  for (auto policy : {SyncPolicy::BricksetLockstep, SyncPolicy::WindowSync}) {
    const auto run = run_dispatch(DenseFetch{&a}, layer, config(4, 16, policy));
    EXPECT_EQ(run.cycles, 16u);
    for (const auto& e : run.events) EXPECT_FALSE(e.idle);
    EXPECT_EQ(run.lane_busy, (std::vector<std::uint64_t>(4, 16)));
  }
}

TEST(Dispatch, WindowSyncLetsLanesRunAhead) {
  // Lane 0: bricks with 4 then 0 effectual; lane 1: 0 then 4.
  const auto a = column({1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 2, 2, 2, 2});
  const auto layer = LayerConfig::of(a, FilterSet(1, 1, 1, 16));
  EXPECT_EQ(run_dispatch(DetectOnFetch{&a, IneffCriterion::zero()}, layer, config(2, 4)).cycles, 8u);
  EXPECT_EQ(run_dispatch(DetectOnFetch{&a, IneffCriterion::zero()}, layer,
                         config(2, 4, SyncPolicy::WindowSync))
                .cycles,
            4u);
}

TEST(Dispatch, SourcesAgreeEventForEvent) {
  SplitMix64 rng(43);
  for (int trial = 0; trial < 40; ++trial) {
    const auto l = testing::random_layer(rng, 6, 3, 2, trial % 2 ? 16 : 4, rng.uniform01(), 0.0);
    const auto layer = l.config();
    const auto cfg = config(1 + rng.next() % 8, l.brick, trial % 3 ? SyncPolicy::BricksetLockstep : SyncPolicy::WindowSync);
    const auto fmt = BrickFormat::for_brick(static_cast<unsigned>(l.brick));
    const auto ref = run_dispatch(DetectOnFetch{&l.acts, IneffCriterion::zero()}, layer, cfg);
    for (Format f : {Format::Zfnaf, Format::Viai, Format::Cviai}) {
      const auto store = EncodedStore::encode(f, l.acts, IneffCriterion::zero(), fmt);
      const auto run = run_dispatch(&store, layer, cfg);
      ASSERT_EQ(run.events, ref.events) << to_string(f);
      ASSERT_EQ(run.cycles, ref.cycles);
    }
  }
}

TEST(Dispatch, BroadcastsEqualEffectualCountsAndNoIneffectualValueSent) {
  SplitMix64 rng(44);
  for (int trial = 0; trial < 30; ++trial) {
    const auto l = testing::random_layer(rng, 6, 3, 2, 8, 0.5, 0.0);
    const auto layer = l.config();
    const auto crit = IneffCriterion::abs_threshold(static_cast<std::uint16_t>(rng.next() % 40));
    const auto run = run_dispatch(DetectOnFetch{&l.acts, crit}, layer, config(3, 8));
    std::uint64_t expected = 0;
    for (std::size_t wx = 0; wx < layer.out_x(); ++wx)
      for (std::size_t wy = 0; wy < layer.out_y(); ++wy)
        for (std::size_t fx = 0; fx < layer.filter_x; ++fx)
          for (std::size_t fy = 0; fy < layer.filter_y; ++fy)
            for (std::size_t i = 0; i < layer.input.depth; ++i)
              expected += crit.effectual(l.acts(wx * l.stride + fx, wy * l.stride + fy, i)) ? 1 : 0;
    EXPECT_EQ(run.broadcasts, expected);
    for (const auto& e : run.events) {
      if (!e.idle) ASSERT_TRUE(crit.effectual(e.value));
    }
  }
}

TEST(Dispatch, FetchPointersAdvanceAndOffsetsIncreasePerBrick) {
  SplitMix64 rng(45);
  const auto l = testing::random_layer(rng, 8, 4, 1, 4, 0.4, 0.0);
  const auto layer = l.config();
  const auto cfg = config(3, 4);
  Dispatcher d(DetectOnFetch{&l.acts, IneffCriterion::zero()}, layer, cfg);
  std::vector<DispatchEvent> events;
  std::vector<std::uint64_t> prev(3, 0);
  for (std::size_t wy = 0; wy < layer.out_y(); ++wy) {
    for (std::size_t wx = 0; wx < layer.out_x(); ++wx) {
      d.run_window(wx, wy, nullptr, 0, events);
      for (std::size_t k = 0; k < events.size(); ++k) {
        for (std::size_t j = k + 1; j < events.size(); ++j) {
          const auto& a = events[k];
          const auto& b = events[j];
          if (!a.idle && !b.idle && a.lane == b.lane && a.brick == b.brick) ASSERT_LT(a.offset, b.offset);
        }
      }
      for (std::size_t l2 = 0; l2 < 3; ++l2) {
        ASSERT_GE(d.fetch_pointers()[l2], prev[l2]);
        prev[l2] = d.fetch_pointers()[l2];
      }
    }
  }
}

TEST(Dispatch, ConfigValidation) {
  auto cfg = config(4, 4);
  cfg.banks.nm_banks = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(config(0, 4).validate(), ConfigError);
  EXPECT_EQ(parse_sync_policy("window"), SyncPolicy::WindowSync);
  EXPECT_EQ(parse_empty_brick_cost("one"), EmptyBrickCost::OneCycle);
  EXPECT_THROW(parse_sync_policy("eventually"), ValidationError);
}

TEST(Dispatch, StoreGeometryMismatchIsFormatError) {
  SplitMix64 rng(46);
  const auto a = testing::random_acts(rng, {2, 2, 16}, 0.3);
  const auto other = testing::random_acts(rng, {3, 3, 16}, 0.3);
  const auto store = EncodedStore::encode(Format::Zfnaf, a, IneffCriterion::zero(), BrickFormat::for_brick(16));
  EXPECT_THROW(run_dispatch(&store, LayerConfig::of(other, FilterSet(1, 1, 1, 16)), config(1, 16)), FormatError);
}

}  // namespace
}  // namespace cnv
