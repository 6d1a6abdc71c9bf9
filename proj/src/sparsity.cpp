#include "cnv/sparsity.hpp"

#include <charconv>

namespace cnv {

IneffCriterion IneffCriterion::abs_threshold(std::uint16_t t) {
  return {Kind::AbsThreshold, t};
}

IneffCriterion IneffCriterion::power_of_two(unsigned k) {
  if (k > 62) throw ValidationError("power-of-two exponent out of range");
  return {Kind::PowerOfTwo, k};
}

IneffCriterion IneffCriterion::make(Kind kind, std::uint32_t parameter) {
  switch (kind) {
    case Kind::Zero:
      if (parameter != 0) throw ValidationError("zero criterion takes no parameter");
      return zero();
    case Kind::AbsThreshold:
      if (parameter > 0xFFFF) throw ValidationError("threshold exceeds 16-bit magnitude");
      return abs_threshold(static_cast<std::uint16_t>(parameter));
    case Kind::PowerOfTwo:
      return power_of_two(parameter);
  }
  throw ValidationError("unknown criterion kind");
}

IneffCriterion IneffCriterion::parse(std::string_view text) {
  if (text == "zero") return zero();
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw ValidationError("bad criterion '" + std::string(text) + "' (want zero, abs:T or pow2:K)");
  }
  const auto name = text.substr(0, colon);
  const auto arg = text.substr(colon + 1);
  std::uint32_t value = 0;
  const auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), value);
  if (ec != std::errc{} || ptr != arg.data() + arg.size() || arg.empty()) {
    throw ValidationError("bad criterion parameter '" + std::string(arg) + "'");
  }
  if (name == "abs") return make(Kind::AbsThreshold, value);
  if (name == "pow2") return make(Kind::PowerOfTwo, value);
  throw ValidationError("unknown criterion '" + std::string(name) + "'");
}

std::string IneffCriterion::to_string() const {
  switch (kind_) {
    case Kind::Zero:
      return "zero";
    case Kind::AbsThreshold:
      return "abs:" + std::to_string(parameter_);
    case Kind::PowerOfTwo:
      return "pow2:" + std::to_string(parameter_);
  }
  return "?";
}

EffectualMask effectual_mask(const Brick& brick, const IneffCriterion& crit) {
  return effectual_mask(std::span<const Value>(brick.values), crit);
}

IsVector is_vector(std::span<const Value> weights, const IneffCriterion& crit) {
  IsVector v(static_cast<unsigned>(weights.size()));
  for (unsigned j = 0; j < weights.size(); ++j) {
    if (crit.ineffectual(weights[j])) v.set(j);
  }
  return v;
}

IsVector is_vector(const Brick& weight_brick, const IneffCriterion& crit) {
  return is_vector(std::span<const Value>(weight_brick.values), crit);
}

IsProduct is_product(std::span<const IsVector> group) {
  if (group.empty()) throw ConfigError("IS product over an empty filter group");
  const unsigned width = group.front().width();
  std::uint64_t bits = ~std::uint64_t{0};
  for (const auto& v : group) {
    if (v.width() != width) throw ConfigError("IS vectors of different widths");
    bits &= v.bits();
  }
  return IsProduct(width, bits);
}

CanSkipVector can_skip(const EffectualMask& mask, const IsProduct& prod) {
  if (mask.width() != prod.width()) throw ConfigError("mask and IS product widths differ");
  return CanSkipVector(mask.width(), prod.bits() | ~mask.bits());
}

IsProductTable::IsProductTable(const FilterSet& filters, std::size_t first, std::size_t last,
                               std::size_t brick, const IneffCriterion& weight_crit)
    : size_y_(filters.size_y()),
      bricks_per_column_(filters.depth() / brick),
      group_size_(last - first) {
  if (first >= last || last > filters.count()) throw ConfigError("bad filter group range");
  if (brick == 0 || brick > kMaxBrick || filters.depth() % brick != 0) {
    throw ConfigError("filter depth is not a whole number of bricks");
  }
  products_.reserve(filters.size_x() * size_y_ * bricks_per_column_);
  std::vector<IsVector> group(group_size_);
  for (std::size_t fx = 0; fx < filters.size_x(); ++fx) {
    for (std::size_t fy = 0; fy < size_y_; ++fy) {
      for (std::size_t ib = 0; ib < bricks_per_column_; ++ib) {
        for (std::size_t f = first; f < last; ++f) {
          const Value* w = &filters(f, fx, fy, ib * brick);
          group[f - first] = is_vector(std::span<const Value>(w, brick), weight_crit);
        }
        products_.push_back(is_product(group));
      }
    }
  }
}

}  // namespace cnv
