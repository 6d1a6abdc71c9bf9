#include <gtest/gtest.h>

#include "cnv/sparsity.hpp"
#include "support.hpp"

namespace cnv {
namespace {

std::vector<Value> vals(std::initializer_list<int> v) { return {v.begin(), v.end()}; }

EffectualMask mask_of(std::initializer_list<int> v, IneffCriterion c = IneffCriterion::zero()) {
  const auto x = vals(v);
  return effectual_mask(std::span<const Value>(x), c);
}

IsVector isv_of(std::initializer_list<int> v, IneffCriterion c = IneffCriterion::zero()) {
  const auto x = vals(v);
  return is_vector(std::span<const Value>(x), c);
}

TEST(Criterion, ThresholdRuleIsInclusive) {
  const auto t = IneffCriterion::abs_threshold(2);
  EXPECT_TRUE(t.ineffectual(2));
  EXPECT_TRUE(t.ineffectual(-2));
  EXPECT_FALSE(t.ineffectual(3));
  EXPECT_EQ(IneffCriterion::abs_threshold(0).ineffectual(0), IneffCriterion::zero().ineffectual(0));
  for (int v = -300; v <= 300; ++v) {
    EXPECT_EQ(IneffCriterion::abs_threshold(0).ineffectual(v), IneffCriterion::zero().ineffectual(v));
  }
}

TEST(Criterion, PowerOfTwoIsStrictlyBelow) {
  const auto p = IneffCriterion::power_of_two(3);
  EXPECT_TRUE(p.ineffectual(7));
  EXPECT_TRUE(p.ineffectual(-7));
  EXPECT_FALSE(p.ineffectual(8));
  EXPECT_FALSE(p.ineffectual(-8));
  EXPECT_TRUE(IneffCriterion::power_of_two(0).ineffectual(0));
  EXPECT_FALSE(IneffCriterion::power_of_two(0).ineffectual(1));
  EXPECT_FALSE(IneffCriterion::power_of_two(0).ineffectual(-1));
}

TEST(Criterion, ParseAndPrint) {
  EXPECT_EQ(IneffCriterion::parse("zero"), IneffCriterion::zero());
  EXPECT_EQ(IneffCriterion::parse("abs:5"), IneffCriterion::abs_threshold(5));
  EXPECT_EQ(IneffCriterion::parse("pow2:4"), IneffCriterion::power_of_two(4));
  for (const char* s : {"zero", "abs:5", "pow2:4"}) EXPECT_EQ(IneffCriterion::parse(s).to_string(), s);
  EXPECT_THROW(IneffCriterion::parse("abs:"), ValidationError);
  EXPECT_THROW(IneffCriterion::parse("pow2:99"), ValidationError);
  EXPECT_THROW(IneffCriterion::parse("median"), ValidationError);
}

TEST(EffectualMask, Examples) {
  EXPECT_EQ(mask_of({1, 0, 0, 4}).to_string(), "1001");
  EXPECT_EQ(mask_of({1, 2, 0, 4}).to_string(), "1101");
  EXPECT_EQ(mask_of({3, -5, 1, 0}, IneffCriterion::abs_threshold(2)).to_string(), "1100");
}

TEST(IsVector, Examples) {
  EXPECT_TRUE(isv_of({0, 0, 0, 0}).all());
  EXPECT_EQ(isv_of({0, 7, 0, -1}).to_string(), "1010");
}

TEST(IsProduct, Examples) {
  const std::vector<IsVector> g{IsVector::from_string("1010"), IsVector::from_string("1100")};
  EXPECT_EQ(is_product(g).to_string(), "1000");
  const std::vector<IsVector> h{IsVector::from_string("1111"), IsVector::from_string("0000"),
                                IsVector::from_string("1011")};
  EXPECT_TRUE(is_product(h).none());
  EXPECT_THROW(is_product(std::span<const IsVector>{}), ConfigError);
}

TEST(IsProduct, EqualsFoldAnd) {
  SplitMix64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<IsVector> g;
    std::uint64_t acc = 0xFFFF;
    for (int k = 0; k < 16; ++k) {
      const std::uint64_t bits = rng.next() | rng.next();  // dense in ones so the AND survives
      g.emplace_back(16, bits);
      acc &= bits;
    }
    EXPECT_EQ(is_product(g).bits(), acc);
  }
}

TEST(CanSkip, Examples) {
  EXPECT_TRUE(can_skip(EffectualMask::ones(4), IsProduct(4)).none());
  EXPECT_EQ(can_skip(EffectualMask::from_string("1101"), IsProduct(4)).to_string(), "0010");
  // Effectual activation whose weights are ineffectual in every filter.
  EXPECT_TRUE(can_skip(EffectualMask::from_string("1111"), IsProduct::from_string("0100")).test(1));
  EXPECT_TRUE(can_skip(EffectualMask(4), IsProduct(4)).all());
}

TEST(MaskProperties, DualityAndDegeneration) {
  SplitMix64 rng(22);
  const IneffCriterion crits[] = {IneffCriterion::zero(), IneffCriterion::abs_threshold(10),
                                  IneffCriterion::power_of_two(5)};
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t B = 1 + rng.next() % 64;
    const auto v = testing::random_values(rng, B, 0.3);
    for (const auto& c : crits) {
      const auto m = effectual_mask(std::span<const Value>(v), c);
      const auto is = is_vector(std::span<const Value>(v), c);
      ASSERT_EQ(is.bits(), m.complement().bits());
      ASSERT_EQ(can_skip(m, IsProduct(static_cast<unsigned>(B))).bits(), m.complement().bits());
      ASSERT_TRUE(can_skip(EffectualMask(static_cast<unsigned>(B)), IsProduct(static_cast<unsigned>(B), rng.next())).all());
      unsigned count = 0;
      for (auto x : v) count += c.effectual(x) ? 1 : 0;
      ASSERT_EQ(m.count(), count);
    }
  }
}

TEST(MaskProperties, ZeroingNeverClearsCanSkip) {
  SplitMix64 rng(23);
  for (int trial = 0; trial < 500; ++trial) {
    const unsigned B = 16;
    auto acts = testing::random_values(rng, B, 0.3);
    std::vector<std::vector<Value>> weights;
    for (int f = 0; f < 3; ++f) weights.push_back(testing::random_values(rng, B, 0.6));
    auto skip_of = [&] {
      std::vector<IsVector> g;
      for (const auto& w : weights) g.push_back(is_vector(std::span<const Value>(w), IneffCriterion::zero()));
      return can_skip(effectual_mask(std::span<const Value>(acts), IneffCriterion::zero()), is_product(g));
    };
    const auto before = skip_of();
    const std::size_t j = rng.next() % B;
    if (rng.next() & 1) {
      acts[j] = 0;
    } else {
      weights[rng.next() % weights.size()][j] = 0;
    }
    const auto after = skip_of();
    ASSERT_EQ(before.bits() & ~after.bits(), 0u) << "a skip bit was cleared";
  }
}

TEST(MaskProperties, LargerGroupsHaveFewerProductBits) {
  SplitMix64 rng(24);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<IsVector> g;
    unsigned prev = 17;
    for (int k = 0; k < 32; ++k) {
      g.emplace_back(16, rng.next() | rng.next() | rng.next());
      const unsigned c = is_product(g).count();
      ASSERT_LE(c, prev);
      prev = c;
    }
  }
}

TEST(IsProductTable, AllResidentGroupWithOneDenseFilterIsZero) {
  SplitMix64 rng(25);
  FilterSet w(256, 1, 1, 16);
  for (std::size_t f = 1; f < 256; ++f) {
    for (std::size_t i = 0; i < 16; ++i) w(f, 0, 0, i) = (rng.next() % 4 == 0) ? 1 : 0;
  }
  for (std::size_t i = 0; i < 16; ++i) w(0, 0, 0, i) = 3;
  const IsProductTable t(w, 0, 256, 16, IneffCriterion::zero());
  EXPECT_EQ(t.group_size(), 256u);
  EXPECT_TRUE(t.at(0, 0, 0).none());
  const IsProductTable rest(w, 1, 256, 16, IneffCriterion::zero());
  EXPECT_EQ(rest.group_size(), 255u);
}

TEST(BrickMask, StringRoundTripAndLeadingOne) {
  const auto m = EffectualMask::from_string("0010110");
  EXPECT_EQ(m.to_string(), "0010110");
  EXPECT_EQ(m.leading_one(), 2u);
  EXPECT_EQ(EffectualMask(7).leading_one(), 7u);
  EXPECT_THROW(EffectualMask::from_string("01x"), ValidationError);
  EXPECT_TRUE(EffectualMask::ones(64).all());
  EXPECT_EQ(EffectualMask::ones(64).count(), 64u);
}

}  // namespace
}  // namespace cnv
