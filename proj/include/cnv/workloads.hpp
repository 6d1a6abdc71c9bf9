#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "cnv/tensor.hpp"

namespace cnv {

// SplitMix64: the n-th output (n = 1, 2, ...) is mix(seed + n * 0x9E3779B97F4A7C15)
// with the standard xor-shift-multiply finalizer. Fully specified, so other
// implementations reproduce the same fixtures bit for bit.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  // Top 53 bits mapped to [0, 1).
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

struct SyntheticSpec {
  Extent3 input{8, 8, 32};
  std::size_t filter_count = 4;
  std::size_t filter_x = 3;
  std::size_t filter_y = 3;
  std::size_t stride = 1;
  std::size_t brick = 16;
  double act_sparsity = 0.0;
  double weight_sparsity = 0.0;
  int value_min = -128;
  int value_max = 127;
  std::uint64_t seed = 1;

  // Throws ValidationError.
  void validate() const;
};

// A convolutional layer: activations, filters and the geometry that pairs
// them. Tensors are stored with their depth padded to whole bricks.
struct Layer {
  ActTensor acts;
  FilterSet filters;
  std::size_t stride = 1;
  std::size_t brick = 16;

  LayerConfig config() const { return LayerConfig::of(acts, filters, stride); }
  bool operator==(const Layer&) const = default;
};

// Every logical activation, then every logical weight, draws two outputs:
// the first decides zero (u < p), the second picks the nonzero value. The
// value is drawn even when zero is chosen, so raising p with a fixed seed only
// zeroes additional positions.
Layer gen_synthetic(const SyntheticSpec& spec);

inline constexpr std::uint16_t kLayerFileVersion = 1;

// Binary `.layer`: magic "CNVL", u16 version, u32 X, Y, I, Fx, Fy, F, stride,
// u16 brick, then activations and weights as little-endian int16 at logical
// depth. Padding to whole bricks is restored on load.
std::vector<std::uint8_t> encode_layer(const Layer& layer);
Layer decode_layer(std::span<const std::uint8_t> bytes);

nlohmann::json layer_to_json(const Layer& layer);
Layer layer_from_json(const nlohmann::json& j);

// Picks the binary or JSON form from the extension (".json" -> JSON).
void save_layer(const std::filesystem::path& path, const Layer& layer);
Layer load_layer(const std::filesystem::path& path);

// Writes `bytes` to a sibling temporary file, then renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const char> bytes);

struct SparsitySummary {
  std::uint64_t activations = 0;
  std::uint64_t zero_activations = 0;
  std::uint64_t weights = 0;
  std::uint64_t zero_weights = 0;
};
SparsitySummary summarize(const Layer& layer);

}  // namespace cnv
