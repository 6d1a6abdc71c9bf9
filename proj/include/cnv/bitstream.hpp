#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cnv {

// MSB-first bit packer. Fields are appended in call order; the final byte is
// zero-padded.
class BitWriter {
 public:
  void put(std::uint64_t value, unsigned bits);
  void put_bit(bool b) { put(b ? 1u : 0u, 1); }

  std::uint64_t bit_count() const { return bits_; }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint64_t bits_ = 0;
};

class BitReader {
 public:
  BitReader(std::span<const std::uint8_t> bytes, std::uint64_t bit_limit);

  // Throws FormatError(Truncated) when reading past the limit.
  std::uint64_t get(unsigned bits);
  bool get_bit() { return get(1) != 0; }
  std::uint64_t position() const { return pos_; }
  std::uint64_t remaining() const { return limit_ - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::uint64_t limit_;
  std::uint64_t pos_ = 0;
};

// Big-endian byte helpers for fixed headers.
void put_be(std::vector<std::uint8_t>& out, std::uint64_t value, unsigned bytes);
std::uint64_t get_be(std::span<const std::uint8_t> in, std::size_t& pos, unsigned bytes);

// Little-endian variants used by the layer file payload.
void put_le(std::vector<std::uint8_t>& out, std::uint64_t value, unsigned bytes);
std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t& pos, unsigned bytes);

// ceil(log2(n)) for n >= 1; 0 for n <= 1.
unsigned ceil_log2(std::uint64_t n);

}  // namespace cnv
