#pragma once

// Activation storage formats that record which values are ineffectual.
//
// Container layouts (B = brick size, ob = offset width, fields MSB-first in
// the order listed):
//
//   ZFNAf  B x (value:16, offset:ob)          effectual pairs front-packed,
//                                             padding pairs are (0, 0)
//   RoE    flag:1, then either B x value:16 (flag 0, raw)
//          or k x (offset:ob, value:16) padded with zeros to B*16 bits
//   VIAI   mask:B, B x value:16               values left in place
//   CVIAI  all masks, then packed effectual values, then one IR pointer per
//          brick; pointer width ceil(log2(packed + 1))
//
// Effectual values are never zero under any criterion, so a zero value slot
// always marks padding and no pair count needs to be stored.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cnv/sparsity.hpp"
#include "cnv/tensor.hpp"

namespace cnv {

enum class Format : std::uint8_t { Raw = 0, Zfnaf = 1, Roe = 2, Viai = 3, Cviai = 4 };

std::string to_string(Format f);
Format parse_format(std::string_view name);

inline constexpr unsigned kValueBits = 16;

struct BrickFormat {
  unsigned brick = 16;
  unsigned offset_bits = 4;

  // Offset width ceil(log2 B).
  static BrickFormat for_brick(unsigned brick);
  void validate() const;
  bool operator==(const BrickFormat&) const = default;
};

struct OffsetValue {
  unsigned offset = 0;
  Value value = 0;

  bool operator==(const OffsetValue&) const = default;
};

// ---------------------------------------------------------------- ZFNAf

struct ZfnafBrick {
  std::vector<OffsetValue> pairs;

  static std::uint64_t container_bits(const BrickFormat& fmt) {
    return std::uint64_t{fmt.brick} * (kValueBits + fmt.offset_bits);
  }
  bool operator==(const ZfnafBrick&) const = default;
};

ZfnafBrick encode_zfnaf(std::span<const Value> brick, const IneffCriterion& crit);
std::vector<Value> decode_zfnaf(const ZfnafBrick& enc, unsigned brick);

// ---------------------------------------------------------------- RoE

struct RoeBrick {
  bool encoded = false;
  std::vector<OffsetValue> pairs;  // flag = 1
  std::vector<Value> raw;          // flag = 0

  static std::uint64_t container_bits(const BrickFormat& fmt) {
    return 1 + std::uint64_t{fmt.brick} * kValueBits;
  }
  // Bits actually carrying information: 1 + k*(16+ob) when encoded,
  // the full container otherwise.
  std::uint64_t used_bits(const BrickFormat& fmt) const;
  bool operator==(const RoeBrick&) const = default;
};

// k effectual values fit iff k*(16+ob) <= B*16 (a tie is encoded).
bool roe_fits(std::size_t effectual, const BrickFormat& fmt);
RoeBrick encode_roe(std::span<const Value> brick, const IneffCriterion& crit,
                    const BrickFormat& fmt);
std::vector<Value> decode_roe(const RoeBrick& enc, unsigned brick);

// ---------------------------------------------------------------- VIAI

struct ViaiBrick {
  EffectualMask mask;
  std::vector<Value> values;

  static std::uint64_t container_bits(const BrickFormat& fmt) {
    return std::uint64_t{fmt.brick} * (1 + kValueBits);
  }
  bool operator==(const ViaiBrick&) const = default;
};

ViaiBrick encode_viai(std::span<const Value> brick, const IneffCriterion& crit);
std::vector<Value> decode_viai(const ViaiBrick& enc);

// ---------------------------------------------------------------- CVIAI

struct CviaiBrickView {
  EffectualMask mask;
  std::span<const Value> packed;
};

class CviaiStore {
 public:
  CviaiStore() = default;
  CviaiStore(Extent3 dims, unsigned brick, std::vector<EffectualMask> masks,
             std::vector<Value> packed, std::vector<std::uint32_t> pointers);

  const Extent3& dims() const { return dims_; }
  unsigned brick() const { return brick_; }
  std::size_t bricks_per_column() const { return dims_.depth / brick_; }
  std::size_t brick_count() const { return masks_.size(); }

  // Follows the IR pointer of brick (x, y, brick_index).
  CviaiBrickView fetch(std::size_t x, std::size_t y, std::size_t brick_index) const;

  std::span<const EffectualMask> masks() const { return masks_; }
  std::span<const Value> packed() const { return packed_; }
  std::span<const std::uint32_t> pointers() const { return pointers_; }
  unsigned pointer_bits() const;
  std::uint64_t footprint_bits() const;

  bool operator==(const CviaiStore&) const = default;

 private:
  Extent3 dims_;
  unsigned brick_ = 16;
  std::vector<EffectualMask> masks_;
  std::vector<Value> packed_;
  std::vector<std::uint32_t> pointers_;
};

CviaiStore encode_cviai(const ActTensor& acts, const IneffCriterion& crit, unsigned brick);
// (mask, packed effectual values) of one brick.
CviaiBrickView fetch_brick_cviai(const CviaiStore& store, std::size_t x, std::size_t y,
                                 std::size_t brick_index);
ActTensor decode_cviai(const CviaiStore& store);

// ---------------------------------------------------------------- tensors

struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Fraction reduced(std::int64_t num, std::int64_t den);
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Fraction&) const = default;
};

struct FootprintReport {
  Format format = Format::Raw;
  std::uint64_t total_bits = 0;
  // X*Y*depth*16 with the depth rounded up to whole bricks.
  std::uint64_t raw_bits = 0;

  // (total - raw) / raw, exact.
  Fraction overhead() const;
  double overhead_percent() const { return 100.0 * overhead().value(); }
};

// Whole-tensor encoded store; bricks are kept in (x, y, brick_index) order.
class EncodedStore {
 public:
  struct RawBody {
    std::vector<Value> values;
    bool operator==(const RawBody&) const = default;
  };
  using Body = std::variant<RawBody, std::vector<ZfnafBrick>, std::vector<RoeBrick>,
                            std::vector<ViaiBrick>, CviaiStore>;

  static EncodedStore encode(Format format, const ActTensor& acts, const IneffCriterion& crit,
                             const BrickFormat& fmt);

  Format format() const { return static_cast<Format>(body_.index()); }
  const Extent3& dims() const { return dims_; }
  std::size_t logical_depth() const { return logical_depth_; }
  const BrickFormat& brick_format() const { return fmt_; }
  const IneffCriterion& criterion() const { return crit_; }
  const Body& body() const { return body_; }
  std::size_t bricks_per_column() const { return dims_.depth / fmt_.brick; }

  ActTensor decode() const;
  std::uint64_t footprint_bits() const;

  // The (offset, value) pairs a dispatcher reading this brick would
  // broadcast. Formats without per-value information (Raw, RoE bricks stored
  // raw) yield every position.
  void brick_pairs(std::size_t x, std::size_t y, std::size_t brick_index,
                   std::vector<OffsetValue>& out) const;

  std::vector<std::uint8_t> serialize() const;
  static EncodedStore deserialize(std::span<const std::uint8_t> bytes);

  bool operator==(const EncodedStore&) const = default;

 private:
  std::size_t brick_linear(std::size_t x, std::size_t y, std::size_t ib) const;

  Extent3 dims_;
  std::size_t logical_depth_ = 0;
  BrickFormat fmt_;
  IneffCriterion crit_;
  Body body_;
};

// Bit-exact storage size of `t` in `format`, computed from per-brick
// effectual counts (no store is materialized). Depth is rounded up to whole
// bricks; missing positions count as ineffectual.
template <class T>
FootprintReport footprint_bits(Format format, const Tensor3<T>& t, const IneffCriterion& crit,
                               const BrickFormat& fmt);

}  // namespace cnv
