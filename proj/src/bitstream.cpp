#include "cnv/bitstream.hpp"

#include <bit>

#include "cnv/errors.hpp"

namespace cnv {

void BitWriter::put(std::uint64_t value, unsigned bits) {
  for (unsigned k = bits; k-- > 0;) {
    if (bits_ % 8 == 0) bytes_.push_back(0);
    if ((value >> k) & 1u) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (bits_ % 8));
    ++bits_;
  }
}

BitReader::BitReader(std::span<const std::uint8_t> bytes, std::uint64_t bit_limit)
    : bytes_(bytes), limit_(bit_limit) {
  if (bit_limit > bytes.size() * 8) {
    throw FormatError(FormatErrorKind::Truncated, "bit stream shorter than declared length");
  }
}

std::uint64_t BitReader::get(unsigned bits) {
  if (bits > remaining()) throw FormatError(FormatErrorKind::Truncated, "read past end of bit stream");
  std::uint64_t v = 0;
  for (unsigned k = 0; k < bits; ++k, ++pos_) {
    const bool bit = (bytes_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
    v = (v << 1) | (bit ? 1u : 0u);
  }
  return v;
}

void put_be(std::vector<std::uint8_t>& out, std::uint64_t value, unsigned bytes) {
  for (unsigned k = bytes; k-- > 0;) out.push_back(static_cast<std::uint8_t>(value >> (8 * k)));
}

std::uint64_t get_be(std::span<const std::uint8_t> in, std::size_t& pos, unsigned bytes) {
  if (pos + bytes > in.size()) throw FormatError(FormatErrorKind::Truncated, "truncated header");
  std::uint64_t v = 0;
  for (unsigned k = 0; k < bytes; ++k) v = (v << 8) | in[pos++];
  return v;
}

void put_le(std::vector<std::uint8_t>& out, std::uint64_t value, unsigned bytes) {
  for (unsigned k = 0; k < bytes; ++k) out.push_back(static_cast<std::uint8_t>(value >> (8 * k)));
}

std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t& pos, unsigned bytes) {
  if (pos + bytes > in.size()) throw FormatError(FormatErrorKind::Truncated, "truncated data");
  std::uint64_t v = 0;
  for (unsigned k = 0; k < bytes; ++k) v |= std::uint64_t{in[pos++]} << (8 * k);
  return v;
}

unsigned ceil_log2(std::uint64_t n) {
  return n <= 1 ? 0u : static_cast<unsigned>(std::bit_width(n - 1));
}

}  // namespace cnv
