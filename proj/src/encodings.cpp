#include "cnv/encodings.hpp"

#include <numeric>

#include "cnv/bitstream.hpp"

namespace cnv {

namespace {

constexpr std::uint8_t kStoreMagic[4] = {'C', 'N', 'V', 'E'};
constexpr std::uint8_t kStoreVersion = 1;

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

std::vector<OffsetValue> effectual_pairs(std::span<const Value> brick, const IneffCriterion& crit) {
  std::vector<OffsetValue> pairs;
  for (unsigned j = 0; j < brick.size(); ++j) {
    if (crit.effectual(brick[j])) pairs.push_back({j, brick[j]});
  }
  return pairs;
}

std::vector<Value> expand_pairs(std::span<const OffsetValue> pairs, unsigned brick) {
  std::vector<Value> out(brick, 0);
  for (const auto& p : pairs) out.at(p.offset) = p.value;
  return out;
}

[[noreturn]] void inconsistent(const std::string& what) {
  throw FormatError(FormatErrorKind::Inconsistent, what);
}

}  // namespace

std::string to_string(Format f) {
  switch (f) {
    case Format::Raw:
      return "raw";
    case Format::Zfnaf:
      return "zfnaf";
    case Format::Roe:
      return "roe";
    case Format::Viai:
      return "viai";
    case Format::Cviai:
      return "cviai";
  }
  return "?";
}

Format parse_format(std::string_view name) {
  for (auto f : {Format::Raw, Format::Zfnaf, Format::Roe, Format::Viai, Format::Cviai}) {
    if (name == to_string(f)) return f;
  }
  throw ValidationError("unknown encoding format '" + std::string(name) + "'");
}

BrickFormat BrickFormat::for_brick(unsigned brick) {
  BrickFormat fmt{brick, ceil_log2(brick)};
  fmt.validate();
  return fmt;
}

void BrickFormat::validate() const {
  if (brick == 0 || brick > kMaxBrick) throw ConfigError("brick size must be in [1, 64]");
  if (offset_bits < ceil_log2(brick) || offset_bits > 16) {
    throw ConfigError("offset width cannot address every brick position");
  }
}

ZfnafBrick encode_zfnaf(std::span<const Value> brick, const IneffCriterion& crit) {
  return {effectual_pairs(brick, crit)};
}

std::vector<Value> decode_zfnaf(const ZfnafBrick& enc, unsigned brick) {
  return expand_pairs(enc.pairs, brick);
}

std::uint64_t RoeBrick::used_bits(const BrickFormat& fmt) const {
  return encoded ? 1 + pairs.size() * std::uint64_t{kValueBits + fmt.offset_bits}
                 : container_bits(fmt);
}

bool roe_fits(std::size_t effectual, const BrickFormat& fmt) {
  return effectual * (kValueBits + fmt.offset_bits) <= std::size_t{fmt.brick} * kValueBits;
}

RoeBrick encode_roe(std::span<const Value> brick, const IneffCriterion& crit,
                    const BrickFormat& fmt) {
  RoeBrick r;
  auto pairs = effectual_pairs(brick, crit);
  if (roe_fits(pairs.size(), fmt)) {
    r.encoded = true;
    r.pairs = std::move(pairs);
  } else {
    r.raw.assign(brick.begin(), brick.end());
  }
  return r;
}

std::vector<Value> decode_roe(const RoeBrick& enc, unsigned brick) {
  return enc.encoded ? expand_pairs(enc.pairs, brick) : enc.raw;
}

ViaiBrick encode_viai(std::span<const Value> brick, const IneffCriterion& crit) {
  return {effectual_mask(brick, crit), std::vector<Value>(brick.begin(), brick.end())};
}

std::vector<Value> decode_viai(const ViaiBrick& enc) {
  std::vector<Value> out = enc.values;
  for (unsigned j = 0; j < out.size(); ++j) {
    if (!enc.mask.test(j)) out[j] = 0;
  }
  return out;
}

// ---------------------------------------------------------------- CVIAI

CviaiStore::CviaiStore(Extent3 dims, unsigned brick, std::vector<EffectualMask> masks,
                       std::vector<Value> packed, std::vector<std::uint32_t> pointers)
    : dims_(dims),
      brick_(brick),
      masks_(std::move(masks)),
      packed_(std::move(packed)),
      pointers_(std::move(pointers)) {
  if (brick_ == 0 || dims_.depth % brick_ != 0) inconsistent("CVIAI depth is not whole bricks");
  const std::size_t n = dims_.x * dims_.y * (dims_.depth / brick_);
  if (masks_.size() != n || pointers_.size() != n) inconsistent("CVIAI brick count mismatch");
  std::uint64_t expect = 0;
  for (std::size_t b = 0; b < n; ++b) {
    if (masks_[b].width() != brick_) inconsistent("CVIAI mask width mismatch");
    if (pointers_[b] != expect) inconsistent("CVIAI pointer does not match mask popcounts");
    expect += masks_[b].count();
  }
  if (expect != packed_.size()) inconsistent("CVIAI packed value count mismatch");
}

CviaiBrickView CviaiStore::fetch(std::size_t x, std::size_t y, std::size_t brick_index) const {
  if (x >= dims_.x || y >= dims_.y || brick_index >= bricks_per_column()) {
    throw BoundsError("CVIAI brick coordinate out of range");
  }
  const std::size_t b = (x * dims_.y + y) * bricks_per_column() + brick_index;
  const EffectualMask& m = masks_[b];
  return {m, std::span<const Value>(packed_).subspan(pointers_[b], m.count())};
}

unsigned CviaiStore::pointer_bits() const { return ceil_log2(packed_.size() + 1); }

std::uint64_t CviaiStore::footprint_bits() const {
  const std::uint64_t n = masks_.size();
  return n * brick_ + packed_.size() * std::uint64_t{kValueBits} + n * pointer_bits();
}

CviaiStore encode_cviai(const ActTensor& acts, const IneffCriterion& crit, unsigned brick) {
  if (brick == 0 || acts.depth() % brick != 0) {
    throw ConfigError("tensor depth is not a whole number of bricks");
  }
  const std::size_t per_col = acts.depth() / brick;
  std::vector<EffectualMask> masks;
  std::vector<Value> packed;
  std::vector<std::uint32_t> pointers;
  masks.reserve(acts.size_x() * acts.size_y() * per_col);
  for (std::size_t x = 0; x < acts.size_x(); ++x) {
    for (std::size_t y = 0; y < acts.size_y(); ++y) {
      const auto col = acts.column(x, y);
      for (std::size_t ib = 0; ib < per_col; ++ib) {
        const auto b = col.subspan(ib * brick, brick);
        pointers.push_back(static_cast<std::uint32_t>(packed.size()));
        masks.push_back(effectual_mask(b, crit));
        for (unsigned j = 0; j < brick; ++j) {
          if (masks.back().test(j)) packed.push_back(b[j]);
        }
      }
    }
  }
  return CviaiStore(acts.dims(), brick, std::move(masks), std::move(packed), std::move(pointers));
}

CviaiBrickView fetch_brick_cviai(const CviaiStore& store, std::size_t x, std::size_t y,
                                 std::size_t brick_index) {
  return store.fetch(x, y, brick_index);
}

ActTensor decode_cviai(const CviaiStore& store) {
  const Extent3 d = store.dims();
  ActTensor out(d.x, d.y, d.depth);
  for (std::size_t x = 0; x < d.x; ++x) {
    for (std::size_t y = 0; y < d.y; ++y) {
      for (std::size_t ib = 0; ib < store.bricks_per_column(); ++ib) {
        const auto v = store.fetch(x, y, ib);
        std::size_t k = 0;
        for (unsigned j = 0; j < store.brick(); ++j) {
          if (v.mask.test(j)) out(x, y, ib * store.brick() + j) = v.packed[k++];
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- footprint

Fraction Fraction::reduced(std::int64_t num, std::int64_t den) {
  if (den == 0) return {0, 1};
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num, den);
  return g == 0 ? Fraction{0, 1} : Fraction{num / g, den / g};
}

Fraction FootprintReport::overhead() const {
  return Fraction::reduced(static_cast<std::int64_t>(total_bits) -
                               static_cast<std::int64_t>(raw_bits),
                           static_cast<std::int64_t>(raw_bits));
}

template <class T>
FootprintReport footprint_bits(Format format, const Tensor3<T>& t, const IneffCriterion& crit,
                               const BrickFormat& fmt) {
  fmt.validate();
  const std::uint64_t per_col = (t.depth() + fmt.brick - 1) / fmt.brick;
  const std::uint64_t bricks = std::uint64_t{t.size_x()} * t.size_y() * per_col;
  FootprintReport r;
  r.format = format;
  r.raw_bits = bricks * fmt.brick * kValueBits;
  switch (format) {
    case Format::Raw:
      r.total_bits = r.raw_bits;
      break;
    case Format::Zfnaf:
      r.total_bits = bricks * ZfnafBrick::container_bits(fmt);
      break;
    case Format::Roe:
      r.total_bits = bricks * RoeBrick::container_bits(fmt);
      break;
    case Format::Viai:
      r.total_bits = bricks * ViaiBrick::container_bits(fmt);
      break;
    case Format::Cviai: {
      const auto values = t.values();
      const auto n = static_cast<std::int64_t>(values.size());
      std::uint64_t packed = 0;
#pragma omp parallel for reduction(+ : packed) schedule(static)
      for (std::int64_t k = 0; k < n; ++k) {
        if (crit.effectual(static_cast<Accum>(values[static_cast<std::size_t>(k)]))) ++packed;
      }
      r.total_bits = bricks * fmt.brick + packed * kValueBits + bricks * ceil_log2(packed + 1);
      break;
    }
  }
  return r;
}

template FootprintReport footprint_bits<Value>(Format, const Tensor3<Value>&,
                                               const IneffCriterion&, const BrickFormat&);
template FootprintReport footprint_bits<Accum>(Format, const Tensor3<Accum>&,
                                               const IneffCriterion&, const BrickFormat&);

// ---------------------------------------------------------------- store

std::size_t EncodedStore::brick_linear(std::size_t x, std::size_t y, std::size_t ib) const {
  if (x >= dims_.x || y >= dims_.y || ib >= bricks_per_column()) {
    throw BoundsError("brick coordinate out of range");
  }
  return (x * dims_.y + y) * bricks_per_column() + ib;
}

EncodedStore EncodedStore::encode(Format format, const ActTensor& acts, const IneffCriterion& crit,
                                  const BrickFormat& fmt) {
  fmt.validate();
  if (acts.depth() % fmt.brick != 0) throw ConfigError("tensor depth is not whole bricks");
  EncodedStore s;
  s.dims_ = acts.dims();
  s.logical_depth_ = acts.logical_depth();
  s.fmt_ = fmt;
  s.crit_ = crit;
  const std::size_t per_col = acts.depth() / fmt.brick;

  auto for_each_brick = [&](auto&& fn) {
    for (std::size_t x = 0; x < acts.size_x(); ++x) {
      for (std::size_t y = 0; y < acts.size_y(); ++y) {
        const auto col = acts.column(x, y);
        for (std::size_t ib = 0; ib < per_col; ++ib) fn(col.subspan(ib * fmt.brick, fmt.brick));
      }
    }
  };

  switch (format) {
    case Format::Raw:
      s.body_ = RawBody{std::vector<Value>(acts.values().begin(), acts.values().end())};
      break;
    case Format::Zfnaf: {
      std::vector<ZfnafBrick> v;
      for_each_brick([&](auto b) { v.push_back(encode_zfnaf(b, crit)); });
      s.body_ = std::move(v);
      break;
    }
    case Format::Roe: {
      std::vector<RoeBrick> v;
      for_each_brick([&](auto b) { v.push_back(encode_roe(b, crit, fmt)); });
      s.body_ = std::move(v);
      break;
    }
    case Format::Viai: {
      std::vector<ViaiBrick> v;
      for_each_brick([&](auto b) { v.push_back(encode_viai(b, crit)); });
      s.body_ = std::move(v);
      break;
    }
    case Format::Cviai:
      s.body_ = encode_cviai(acts, crit, fmt.brick);
      break;
  }
  return s;
}

ActTensor EncodedStore::decode() const {
  ActTensor out(dims_.x, dims_.y, dims_.depth);
  const unsigned B = fmt_.brick;
  auto write_bricks = [&](const auto& bricks, auto&& expand) {
    std::size_t k = 0;
    for (std::size_t x = 0; x < dims_.x; ++x) {
      for (std::size_t y = 0; y < dims_.y; ++y) {
        for (std::size_t ib = 0; ib < bricks_per_column(); ++ib, ++k) {
          const std::vector<Value> v = expand(bricks[k]);
          for (unsigned j = 0; j < B; ++j) out(x, y, ib * B + j) = v[j];
        }
      }
    }
  };
  std::visit(Overloaded{
                 [&](const RawBody& b) {
                   std::copy(b.values.begin(), b.values.end(), out.values().begin());
                 },
                 [&](const std::vector<ZfnafBrick>& b) {
                   write_bricks(b, [&](const ZfnafBrick& z) { return decode_zfnaf(z, B); });
                 },
                 [&](const std::vector<RoeBrick>& b) {
                   write_bricks(b, [&](const RoeBrick& r) { return decode_roe(r, B); });
                 },
                 [&](const std::vector<ViaiBrick>& b) {
                   write_bricks(b, [](const ViaiBrick& v) { return decode_viai(v); });
                 },
                 [&](const CviaiStore& c) { out = decode_cviai(c); },
             },
             body_);
  if (logical_depth_ != dims_.depth) {
    ActTensor padded(dims_.x, dims_.y, logical_depth_, B);
    std::copy(out.values().begin(), out.values().end(), padded.values().begin());
    return padded;
  }
  return out;
}

std::uint64_t EncodedStore::footprint_bits() const {
  const std::uint64_t n = dims_.x * dims_.y * bricks_per_column();
  return std::visit(Overloaded{
                        [&](const RawBody& b) { return b.values.size() * std::uint64_t{kValueBits}; },
                        [&](const std::vector<ZfnafBrick>&) { return n * ZfnafBrick::container_bits(fmt_); },
                        [&](const std::vector<RoeBrick>&) { return n * RoeBrick::container_bits(fmt_); },
                        [&](const std::vector<ViaiBrick>&) { return n * ViaiBrick::container_bits(fmt_); },
                        [&](const CviaiStore& c) { return c.footprint_bits(); },
                    },
                    body_);
}

void EncodedStore::brick_pairs(std::size_t x, std::size_t y, std::size_t ib,
                               std::vector<OffsetValue>& out) const {
  out.clear();
  const std::size_t k = brick_linear(x, y, ib);
  const unsigned B = fmt_.brick;
  auto all_positions = [&](std::span<const Value> v) {
    for (unsigned j = 0; j < B; ++j) out.push_back({j, v[j]});
  };
  std::visit(Overloaded{
                 [&](const RawBody& b) {
                   all_positions(std::span<const Value>(b.values).subspan(k * B, B));
                 },
                 [&](const std::vector<ZfnafBrick>& b) {
                   out.assign(b[k].pairs.begin(), b[k].pairs.end());
                 },
                 [&](const std::vector<RoeBrick>& b) {
                   if (b[k].encoded) {
                     out.assign(b[k].pairs.begin(), b[k].pairs.end());
                   } else {
                     all_positions(b[k].raw);
                   }
                 },
                 [&](const std::vector<ViaiBrick>& b) {
                   const ViaiBrick& v = b[k];
                   for (unsigned j = v.mask.leading_one(); j < B; ++j) {
                     if (v.mask.test(j)) out.push_back({j, v.values[j]});
                   }
                 },
                 [&](const CviaiStore& c) {
                   const auto v = c.fetch(x, y, ib);
                   std::size_t p = 0;
                   for (unsigned j = 0; j < B; ++j) {
                     if (v.mask.test(j)) out.push_back({j, v.packed[p++]});
                   }
                 },
             },
             body_);
}

// ---------------------------------------------------------------- serialization

std::vector<std::uint8_t> EncodedStore::serialize() const {
  const unsigned B = fmt_.brick;
  const unsigned ob = fmt_.offset_bits;
  BitWriter w;
  auto put_value = [&](Value v) { w.put(static_cast<std::uint16_t>(v), kValueBits); };

  std::uint64_t cviai_packed = 0;
  unsigned cviai_ptr_bits = 0;
  std::visit(Overloaded{
                 [&](const RawBody& b) {
                   for (Value v : b.values) put_value(v);
                 },
                 [&](const std::vector<ZfnafBrick>& bricks) {
                   for (const auto& z : bricks) {
                     for (unsigned s = 0; s < B; ++s) {
                       const OffsetValue p = s < z.pairs.size() ? z.pairs[s] : OffsetValue{};
                       put_value(p.value);
                       w.put(p.offset, ob);
                     }
                   }
                 },
                 [&](const std::vector<RoeBrick>& bricks) {
                   for (const auto& r : bricks) {
                     w.put_bit(r.encoded);
                     if (r.encoded) {
                       for (const auto& p : r.pairs) {
                         w.put(p.offset, ob);
                         put_value(p.value);
                       }
                       w.put(0, static_cast<unsigned>(B * kValueBits - r.pairs.size() * (kValueBits + ob)));
                     } else {
                       for (Value v : r.raw) put_value(v);
                     }
                   }
                 },
                 [&](const std::vector<ViaiBrick>& bricks) {
                   for (const auto& v : bricks) {
                     for (unsigned j = 0; j < B; ++j) w.put_bit(v.mask.test(j));
                     for (Value x : v.values) put_value(x);
                   }
                 },
                 [&](const CviaiStore& c) {
                   cviai_packed = c.packed().size();
                   cviai_ptr_bits = c.pointer_bits();
                   for (const auto& m : c.masks()) {
                     for (unsigned j = 0; j < B; ++j) w.put_bit(m.test(j));
                   }
                   for (Value v : c.packed()) put_value(v);
                   for (auto p : c.pointers()) w.put(p, cviai_ptr_bits);
                 },
             },
             body_);

  std::vector<std::uint8_t> out(std::begin(kStoreMagic), std::end(kStoreMagic));
  put_be(out, kStoreVersion, 1);
  put_be(out, static_cast<std::uint8_t>(format()), 1);
  put_be(out, B, 1);
  put_be(out, ob, 1);
  put_be(out, static_cast<std::uint8_t>(crit_.kind()), 1);
  put_be(out, crit_.parameter(), 4);
  put_be(out, dims_.x, 4);
  put_be(out, dims_.y, 4);
  put_be(out, dims_.depth, 4);
  put_be(out, logical_depth_, 4);
  if (format() == Format::Cviai) {
    put_be(out, cviai_packed, 4);
    put_be(out, cviai_ptr_bits, 1);
  }
  put_be(out, w.bit_count(), 8);
  const auto& body = w.bytes();
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

EncodedStore EncodedStore::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(std::begin(kStoreMagic), std::end(kStoreMagic), bytes.begin())) {
    throw FormatError(FormatErrorKind::BadMagic, "not an encoded activation store");
  }
  std::size_t pos = 4;
  if (get_be(bytes, pos, 1) != kStoreVersion) {
    throw FormatError(FormatErrorKind::VersionMismatch, "unsupported encoded store version");
  }
  const auto format = static_cast<std::uint8_t>(get_be(bytes, pos, 1));
  if (format > static_cast<std::uint8_t>(Format::Cviai)) inconsistent("unknown format tag");

  EncodedStore s;
  s.fmt_.brick = static_cast<unsigned>(get_be(bytes, pos, 1));
  s.fmt_.offset_bits = static_cast<unsigned>(get_be(bytes, pos, 1));
  const auto crit_kind = get_be(bytes, pos, 1);
  const auto crit_param = static_cast<std::uint32_t>(get_be(bytes, pos, 4));
  if (crit_kind > 2) inconsistent("unknown criterion tag");
  try {
    s.fmt_.validate();
    s.crit_ = IneffCriterion::make(static_cast<IneffCriterion::Kind>(crit_kind), crit_param);
  } catch (const std::invalid_argument& e) {
    inconsistent(e.what());
  }
  s.dims_.x = get_be(bytes, pos, 4);
  s.dims_.y = get_be(bytes, pos, 4);
  s.dims_.depth = get_be(bytes, pos, 4);
  s.logical_depth_ = get_be(bytes, pos, 4);
  const unsigned B = s.fmt_.brick;
  const unsigned ob = s.fmt_.offset_bits;
  if (s.dims_.depth % B != 0 || s.logical_depth_ > s.dims_.depth) {
    inconsistent("depth is not whole bricks");
  }
  std::uint64_t cviai_packed = 0;
  unsigned cviai_ptr_bits = 0;
  if (static_cast<Format>(format) == Format::Cviai) {
    cviai_packed = get_be(bytes, pos, 4);
    cviai_ptr_bits = static_cast<unsigned>(get_be(bytes, pos, 1));
  }
  const std::uint64_t body_bits = get_be(bytes, pos, 8);
  if ((body_bits + 7) / 8 > bytes.size() - pos) {
    throw FormatError(FormatErrorKind::Truncated, "encoded store body truncated");
  }
  BitReader r(bytes.subspan(pos), body_bits);
  auto get_value = [&] { return static_cast<Value>(static_cast<std::uint16_t>(r.get(kValueBits))); };
  auto check_pair = [&](const std::vector<OffsetValue>& pairs, const OffsetValue& p) {
    if (p.offset >= B) inconsistent("offset outside brick");
    if (!pairs.empty() && pairs.back().offset >= p.offset) inconsistent("offsets not increasing");
    if (s.crit_.ineffectual(p.value)) inconsistent("stored value is ineffectual");
  };

  const std::size_t n = s.dims_.x * s.dims_.y * (s.dims_.depth / B);
  switch (static_cast<Format>(format)) {
    case Format::Raw: {
      RawBody b;
      b.values.resize(n * B);
      for (auto& v : b.values) v = get_value();
      s.body_ = std::move(b);
      break;
    }
    case Format::Zfnaf: {
      std::vector<ZfnafBrick> v(n);
      for (auto& z : v) {
        for (unsigned slot = 0; slot < B; ++slot) {
          const Value val = get_value();
          const auto off = static_cast<unsigned>(r.get(ob));
          if (val == 0) {
            if (off != 0) inconsistent("nonzero offset in padding pair");
            continue;
          }
          check_pair(z.pairs, {off, val});
          z.pairs.push_back({off, val});
        }
      }
      s.body_ = std::move(v);
      break;
    }
    case Format::Roe: {
      std::vector<RoeBrick> v(n);
      const unsigned slots = B * kValueBits / (kValueBits + ob);
      const unsigned tail = B * kValueBits - slots * (kValueBits + ob);
      for (auto& e : v) {
        e.encoded = r.get_bit();
        if (e.encoded) {
          for (unsigned slot = 0; slot < slots; ++slot) {
            const auto off = static_cast<unsigned>(r.get(ob));
            const Value val = get_value();
            if (val == 0) continue;
            check_pair(e.pairs, {off, val});
            e.pairs.push_back({off, val});
          }
          r.get(tail);
        } else {
          e.raw.resize(B);
          for (auto& x : e.raw) x = get_value();
        }
      }
      s.body_ = std::move(v);
      break;
    }
    case Format::Viai: {
      std::vector<ViaiBrick> v(n);
      for (auto& e : v) {
        e.mask = EffectualMask(B);
        for (unsigned j = 0; j < B; ++j) {
          if (r.get_bit()) e.mask.set(j);
        }
        e.values.resize(B);
        for (auto& x : e.values) x = get_value();
      }
      s.body_ = std::move(v);
      break;
    }
    case Format::Cviai: {
      std::vector<EffectualMask> masks(n, EffectualMask(B));
      for (auto& m : masks) {
        for (unsigned j = 0; j < B; ++j) {
          if (r.get_bit()) m.set(j);
        }
      }
      std::vector<Value> packed(cviai_packed);
      for (auto& x : packed) x = get_value();
      std::vector<std::uint32_t> pointers(n);
      for (auto& p : pointers) p = static_cast<std::uint32_t>(r.get(cviai_ptr_bits));
      s.body_ = CviaiStore(s.dims_, B, std::move(masks), std::move(packed), std::move(pointers));
      if (std::get<CviaiStore>(s.body_).pointer_bits() != cviai_ptr_bits) {
        inconsistent("CVIAI pointer width mismatch");
      }
      break;
    }
  }
  if (r.remaining() != 0) inconsistent("trailing bits after encoded store body");
  return s;
}

}  // namespace cnv
