#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cnv/tensor.hpp"

namespace cnv {

inline constexpr std::size_t kMaxBrick = 64;

// Classifies values as ineffectual. A value is ineffectual iff
//   Zero:          v == 0
//   AbsThreshold:  |v| <= t        (so Zero == AbsThreshold(0))
//   PowerOfTwo:    |v| <  2^k      (k == 0 degenerates to Zero)
// Effectual values are therefore always nonzero.
class IneffCriterion {
 public:
  enum class Kind : std::uint8_t { Zero = 0, AbsThreshold = 1, PowerOfTwo = 2 };

  IneffCriterion() = default;
  static IneffCriterion zero() { return {}; }
  static IneffCriterion abs_threshold(std::uint16_t t);
  static IneffCriterion power_of_two(unsigned k);
  static IneffCriterion make(Kind kind, std::uint32_t parameter);
  // Accepts "zero", "abs:<t>" and "pow2:<k>".
  static IneffCriterion parse(std::string_view text);

  Kind kind() const { return kind_; }
  std::uint32_t parameter() const { return parameter_; }

  bool ineffectual(Accum v) const {
    const Accum mag = v < 0 ? -v : v;
    switch (kind_) {
      case Kind::Zero:
        return v == 0;
      case Kind::AbsThreshold:
        return mag <= static_cast<Accum>(parameter_);
      case Kind::PowerOfTwo:
        return (mag >> parameter_) == 0;
    }
    return false;
  }
  bool effectual(Accum v) const { return !ineffectual(v); }

  std::string to_string() const;
  bool operator==(const IneffCriterion&) const = default;

 private:
  IneffCriterion(Kind kind, std::uint32_t parameter) : kind_(kind), parameter_(parameter) {}

  Kind kind_ = Kind::Zero;
  std::uint32_t parameter_ = 0;
};

// Fixed-width per-brick bit vector; bit j describes brick position j. The
// textual form lists position 0 first.
template <class Tag>
class BrickMask {
 public:
  BrickMask() = default;
  explicit BrickMask(unsigned width, std::uint64_t bits = 0) : bits_(bits & full(width)), width_(width) {
    if (width > kMaxBrick) throw ConfigError("brick mask wider than 64 bits");
  }

  static BrickMask ones(unsigned width) { return BrickMask(width, full(width)); }
  // "1101" -> bits 0, 1 and 3 set.
  static BrickMask from_string(std::string_view s) {
    BrickMask m(static_cast<unsigned>(s.size()));
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s[j] == '1') {
        m.set(static_cast<unsigned>(j));
      } else if (s[j] != '0') {
        throw ValidationError("mask string must contain only 0 and 1");
      }
    }
    return m;
  }

  unsigned width() const { return width_; }
  std::uint64_t bits() const { return bits_; }
  bool test(unsigned j) const { return (bits_ >> j) & 1u; }
  void set(unsigned j) { bits_ |= std::uint64_t{1} << j; }
  void reset(unsigned j) { bits_ &= ~(std::uint64_t{1} << j); }
  unsigned count() const { return static_cast<unsigned>(std::popcount(bits_)); }
  bool none() const { return bits_ == 0; }
  bool all() const { return bits_ == full(width_); }
  // Lowest set position; width() when empty.
  unsigned leading_one() const {
    return bits_ == 0 ? width_ : static_cast<unsigned>(std::countr_zero(bits_));
  }
  BrickMask complement() const { return BrickMask(width_, ~bits_); }

  std::string to_string() const {
    std::string s(width_, '0');
    for (unsigned j = 0; j < width_; ++j) {
      if (test(j)) s[j] = '1';
    }
    return s;
  }

  bool operator==(const BrickMask&) const = default;

 private:
  static std::uint64_t full(unsigned width) {
    return width >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << width) - 1;
  }

  std::uint64_t bits_ = 0;
  unsigned width_ = 0;
};

struct EffectualTag {};
struct IsVectorTag {};
struct IsProductTag {};
struct CanSkipTag {};

// bit j = 1: activation j is effectual.
using EffectualMask = BrickMask<EffectualTag>;
// bit j = 1: weight j is ineffectual (opposite polarity to EffectualMask).
using IsVector = BrickMask<IsVectorTag>;
// bit j = 1: every weight of the filter group at offset j is ineffectual.
using IsProduct = BrickMask<IsProductTag>;
// bit j = 1: the multiplications at offset j can be skipped.
using CanSkipVector = BrickMask<CanSkipTag>;

template <class T>
EffectualMask effectual_mask(std::span<const T> values, const IneffCriterion& crit) {
  EffectualMask m(static_cast<unsigned>(values.size()));
  for (unsigned j = 0; j < values.size(); ++j) {
    if (crit.effectual(static_cast<Accum>(values[j]))) m.set(j);
  }
  return m;
}
EffectualMask effectual_mask(const Brick& brick, const IneffCriterion& crit);

IsVector is_vector(std::span<const Value> weights, const IneffCriterion& crit);
IsVector is_vector(const Brick& weight_brick, const IneffCriterion& crit);

// Bitwise AND across a non-empty group of IS vectors.
IsProduct is_product(std::span<const IsVector> group);

// bit j = prod_j OR NOT mask_j. The complement converts the effectual-polarity
// mask into the ineffectual polarity the predicate is defined over.
CanSkipVector can_skip(const EffectualMask& mask, const IsProduct& prod);

// Precomputed IS products of one filter group for every weight brick position
// (fx, fy, brick_index).
class IsProductTable {
 public:
  IsProductTable() = default;
  // Group = filters [first, last).
  IsProductTable(const FilterSet& filters, std::size_t first, std::size_t last, std::size_t brick,
                 const IneffCriterion& weight_crit);

  const IsProduct& at(std::size_t fx, std::size_t fy, std::size_t brick_index) const {
    return products_[(fx * size_y_ + fy) * bricks_per_column_ + brick_index];
  }
  std::size_t group_size() const { return group_size_; }

 private:
  std::size_t size_y_ = 0;
  std::size_t bricks_per_column_ = 0;
  std::size_t group_size_ = 0;
  std::vector<IsProduct> products_;
};

}  // namespace cnv
