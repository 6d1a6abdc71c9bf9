#include "cnv/workloads.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <system_error>

#include "cnv/bitstream.hpp"

namespace cnv {

namespace {

constexpr char kLayerMagic[4] = {'C', 'N', 'V', 'L'};

std::uint64_t nonzero_count(int lo, int hi) {
  std::uint64_t n = static_cast<std::uint64_t>(hi - lo + 1);
  if (lo <= 0 && 0 <= hi) --n;
  return n;
}

Value draw(SplitMix64& rng, double p, int lo, std::uint64_t choices) {
  const bool zero = rng.uniform01() < p;
  const std::uint64_t pick = rng.next();
  if (zero || choices == 0) return 0;
  int v = lo + static_cast<int>(pick % choices);
  if (lo <= 0 && v >= 0) ++v;
  return static_cast<Value>(v);
}

void fill_logical(std::span<Value> dst, std::size_t columns, std::size_t logical,
                  std::size_t stored, auto&& next) {
  for (std::size_t c = 0; c < columns; ++c) {
    for (std::size_t i = 0; i < logical; ++i) dst[c * stored + i] = next();
  }
}

template <class Fn>
void for_logical(std::span<const Value> src, std::size_t columns, std::size_t logical,
                 std::size_t stored, Fn&& fn) {
  for (std::size_t c = 0; c < columns; ++c) {
    for (std::size_t i = 0; i < logical; ++i) fn(src[c * stored + i]);
  }
}

Layer empty_layer(Extent3 input, std::size_t count, std::size_t fx, std::size_t fy,
                  std::size_t stride, std::size_t brick) {
  Layer l;
  l.acts = ActTensor(input.x, input.y, input.depth, brick);
  l.filters = FilterSet(count, fx, fy, input.depth, brick);
  l.stride = stride;
  l.brick = brick;
  return l;
}

void check_geometry(const Extent3& input, std::size_t count, std::size_t fx, std::size_t fy,
                    std::size_t stride, std::size_t brick) {
  if (brick == 0 || brick > 64) throw ValidationError("brick size must be in [1, 64]");
  LayerConfig cfg{input, fx, fy, count, stride};
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ValidationError(e.what());
  }
}

}  // namespace

void SyntheticSpec::validate() const {
  if (!(act_sparsity >= 0.0 && act_sparsity <= 1.0)) {
    throw ValidationError("activation sparsity must be within [0, 1]");
  }
  if (!(weight_sparsity >= 0.0 && weight_sparsity <= 1.0)) {
    throw ValidationError("weight sparsity must be within [0, 1]");
  }
  if (value_min > value_max) throw ValidationError("value range is empty");
  if (value_min < std::numeric_limits<Value>::min() || value_max > std::numeric_limits<Value>::max()) {
    throw ValidationError("value range exceeds 16-bit two's complement");
  }
  if (nonzero_count(value_min, value_max) == 0 && (act_sparsity < 1.0 || weight_sparsity < 1.0)) {
    throw ValidationError("value range holds no nonzero value");
  }
  check_geometry(input, filter_count, filter_x, filter_y, stride, brick);
}

Layer gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Layer l = empty_layer(spec.input, spec.filter_count, spec.filter_x, spec.filter_y, spec.stride,
                        spec.brick);
  SplitMix64 rng(spec.seed);
  const std::uint64_t choices = nonzero_count(spec.value_min, spec.value_max);
  fill_logical(l.acts.values(), spec.input.x * spec.input.y, spec.input.depth, l.acts.depth(),
               [&] { return draw(rng, spec.act_sparsity, spec.value_min, choices); });
  fill_logical(l.filters.values(), spec.filter_count * spec.filter_x * spec.filter_y,
               spec.input.depth, l.filters.depth(),
               [&] { return draw(rng, spec.weight_sparsity, spec.value_min, choices); });
  return l;
}

std::vector<std::uint8_t> encode_layer(const Layer& layer) {
  std::vector<std::uint8_t> out(std::begin(kLayerMagic), std::end(kLayerMagic));
  put_le(out, kLayerFileVersion, 2);
  put_le(out, layer.acts.size_x(), 4);
  put_le(out, layer.acts.size_y(), 4);
  put_le(out, layer.acts.logical_depth(), 4);
  put_le(out, layer.filters.size_x(), 4);
  put_le(out, layer.filters.size_y(), 4);
  put_le(out, layer.filters.count(), 4);
  put_le(out, layer.stride, 4);
  put_le(out, layer.brick, 2);
  auto put = [&](Value v) { put_le(out, static_cast<std::uint16_t>(v), 2); };
  for_logical(layer.acts.values(), layer.acts.size_x() * layer.acts.size_y(),
              layer.acts.logical_depth(), layer.acts.depth(), put);
  for_logical(layer.filters.values(),
              layer.filters.count() * layer.filters.size_x() * layer.filters.size_y(),
              layer.filters.logical_depth(), layer.filters.depth(), put);
  return out;
}

Layer decode_layer(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(std::begin(kLayerMagic), std::end(kLayerMagic), bytes.begin(),
                                      [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; })) {
    throw FormatError(FormatErrorKind::BadMagic, "not a layer file (bad magic)");
  }
  std::size_t pos = 4;
  const auto version = get_le(bytes, pos, 2);
  if (version != kLayerFileVersion) {
    throw FormatError(FormatErrorKind::VersionMismatch,
                      "layer file version " + std::to_string(version) + " is not supported");
  }
  Extent3 input;
  input.x = get_le(bytes, pos, 4);
  input.y = get_le(bytes, pos, 4);
  input.depth = get_le(bytes, pos, 4);
  const std::size_t fx = get_le(bytes, pos, 4);
  const std::size_t fy = get_le(bytes, pos, 4);
  const std::size_t count = get_le(bytes, pos, 4);
  const std::size_t stride = get_le(bytes, pos, 4);
  const std::size_t brick = get_le(bytes, pos, 2);
  try {
    check_geometry(input, count, fx, fy, stride, brick);
  } catch (const ValidationError& e) {
    throw FormatError(FormatErrorKind::Inconsistent, e.what());
  }
  const std::uint64_t payload = 2 * (input.volume() + std::uint64_t{count} * fx * fy * input.depth);
  if (bytes.size() - pos < payload) {
    throw FormatError(FormatErrorKind::Truncated, "layer file payload truncated");
  }
  if (bytes.size() - pos > payload) {
    throw FormatError(FormatErrorKind::Inconsistent, "trailing bytes after layer payload");
  }
  Layer l = empty_layer(input, count, fx, fy, stride, brick);
  auto next = [&] { return static_cast<Value>(static_cast<std::uint16_t>(get_le(bytes, pos, 2))); };
  fill_logical(l.acts.values(), input.x * input.y, input.depth, l.acts.depth(), next);
  fill_logical(l.filters.values(), count * fx * fy, input.depth, l.filters.depth(), next);
  return l;
}

nlohmann::json layer_to_json(const Layer& layer) {
  std::vector<int> acts;
  std::vector<int> weights;
  for_logical(layer.acts.values(), layer.acts.size_x() * layer.acts.size_y(),
              layer.acts.logical_depth(), layer.acts.depth(), [&](Value v) { acts.push_back(v); });
  for_logical(layer.filters.values(),
              layer.filters.count() * layer.filters.size_x() * layer.filters.size_y(),
              layer.filters.logical_depth(), layer.filters.depth(),
              [&](Value v) { weights.push_back(v); });
  return {
      {"format", "cnv-layer"},
      {"version", kLayerFileVersion},
      {"brick", layer.brick},
      {"stride", layer.stride},
      {"input",
       {{"x", layer.acts.size_x()},
        {"y", layer.acts.size_y()},
        {"depth", layer.acts.logical_depth()},
        {"values", acts}}},
      {"filters",
       {{"count", layer.filters.count()},
        {"x", layer.filters.size_x()},
        {"y", layer.filters.size_y()},
        {"values", weights}}},
  };
}

Layer layer_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || j.value("format", "") != "cnv-layer") {
      throw FormatError(FormatErrorKind::BadMagic, "not a cnv-layer JSON document");
    }
    if (j.at("version").get<int>() != kLayerFileVersion) {
      throw FormatError(FormatErrorKind::VersionMismatch, "unsupported layer JSON version");
    }
    const auto& in = j.at("input");
    const auto& fs = j.at("filters");
    const Extent3 input{in.at("x").get<std::size_t>(), in.at("y").get<std::size_t>(),
                        in.at("depth").get<std::size_t>()};
    const auto count = fs.at("count").get<std::size_t>();
    const auto fx = fs.at("x").get<std::size_t>();
    const auto fy = fs.at("y").get<std::size_t>();
    const auto stride = j.value("stride", std::size_t{1});
    const auto brick = j.value("brick", std::size_t{16});
    check_geometry(input, count, fx, fy, stride, brick);
    const auto acts = in.at("values").get<std::vector<int>>();
    const auto weights = fs.at("values").get<std::vector<int>>();
    if (acts.size() != input.volume() || weights.size() != count * fx * fy * input.depth) {
      throw FormatError(FormatErrorKind::Truncated, "layer JSON value count does not match dims");
    }
    auto to_value = [](int v) {
      if (v < std::numeric_limits<Value>::min() || v > std::numeric_limits<Value>::max()) {
        throw FormatError(FormatErrorKind::Inconsistent, "value outside 16-bit range");
      }
      return static_cast<Value>(v);
    };
    Layer l = empty_layer(input, count, fx, fy, stride, brick);
    std::size_t k = 0;
    fill_logical(l.acts.values(), input.x * input.y, input.depth, l.acts.depth(),
                 [&] { return to_value(acts[k++]); });
    k = 0;
    fill_logical(l.filters.values(), count * fx * fy, input.depth, l.filters.depth(),
                 [&] { return to_value(weights[k++]); });
    return l;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrorKind::Inconsistent, std::string("layer JSON: ") + e.what());
  } catch (const ValidationError& e) {
    throw FormatError(FormatErrorKind::Inconsistent, e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, std::span<const char> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_layer(const std::filesystem::path& path, const Layer& layer) {
  if (path.extension() == ".json") {
    const std::string text = layer_to_json(layer).dump(1) + "\n";
    write_file_atomic(path, text);
  } else {
    const auto bytes = encode_layer(layer);
    write_file_atomic(path, std::span<const char>(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  }
}

Layer load_layer(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open layer file " + path.string());
  if (path.extension() == ".json") {
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(FormatErrorKind::BadMagic, std::string("layer JSON: ") + e.what());
    }
    return layer_from_json(j);
  }
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                        std::istreambuf_iterator<char>());
  return decode_layer(bytes);
}

SparsitySummary summarize(const Layer& layer) {
  SparsitySummary s;
  for_logical(layer.acts.values(), layer.acts.size_x() * layer.acts.size_y(),
              layer.acts.logical_depth(), layer.acts.depth(), [&](Value v) {
                ++s.activations;
                if (v == 0) ++s.zero_activations;
              });
  for_logical(layer.filters.values(),
              layer.filters.count() * layer.filters.size_x() * layer.filters.size_y(),
              layer.filters.logical_depth(), layer.filters.depth(), [&](Value v) {
                ++s.weights;
                if (v == 0) ++s.zero_weights;
              });
  return s;
}

}  // namespace cnv
