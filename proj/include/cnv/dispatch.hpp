#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cnv/encodings.hpp"
#include "cnv/sparsity.hpp"
#include "cnv/tensor.hpp"

namespace cnv {

// WindowSync: every lane drains its whole slice independently and lanes
// meet at window boundaries.
// BricksetLockstep: the i-th brick of every lane forms a set; no lane starts
// its next brick until the slowest lane finished the current set.
enum class SyncPolicy : std::uint8_t { WindowSync, BricksetLockstep };

// Cost of a brick with nothing to broadcast.
enum class EmptyBrickCost : std::uint8_t { ZeroCycles, OneCycle };

std::string to_string(SyncPolicy p);
std::string to_string(EmptyBrickCost c);
SyncPolicy parse_sync_policy(std::string_view s);
EmptyBrickCost parse_empty_brick_cost(std::string_view s);

// NM banks; lane l reads every brick of its slice from bank l.
struct BankLayout {
  std::size_t nm_banks = 16;

  static BankLayout one_per_lane(std::size_t lanes) { return {lanes}; }
  std::size_t bank_of_lane(std::size_t lane) const { return lane % nm_banks; }
};

// One brick buffer entry plus its remaining-effectual vector E. Draining pops
// the leading one of E each step.
class BrickBuffer {
 public:
  void load(std::span<const Value> values, const EffectualMask& send);
  bool drained() const { return remaining_.none(); }
  OffsetValue pop();
  const EffectualMask& remaining() const { return remaining_; }

 private:
  std::vector<Value> values_;
  EffectualMask remaining_;
};

// Effectual positions in ascending offset order.
std::vector<OffsetValue> stream_brick(std::span<const Value> brick, const IneffCriterion& crit);
// Positions whose CanSkip bit is clear, ascending.
std::vector<OffsetValue> stream_brick_weightaware(std::span<const Value> brick,
                                                  const IneffCriterion& act_crit,
                                                  const IsProduct& prod);

// Where the dispatcher reads activations from: a raw tensor with ineffectual
// detection at fetch time, a raw tensor with no detection at all (the dense
// baseline), or a pre-encoded store.
struct DetectOnFetch {
  const ActTensor* acts;
  IneffCriterion crit;
};
struct DenseFetch {
  const ActTensor* acts;
};
using ActivationSource = std::variant<DetectOnFetch, DenseFetch, const EncodedStore*>;

struct DispatchConfig {
  std::size_t lanes = 16;
  std::size_t brick = 16;
  SyncPolicy policy = SyncPolicy::BricksetLockstep;
  EmptyBrickCost empty_cost = EmptyBrickCost::ZeroCycles;
  // Cycles before the first brick arrives; prefetch hides all later fetches.
  std::size_t fetch_latency = 0;
  BankLayout banks{16};

  void validate() const;
};

struct DispatchEvent {
  std::uint64_t cycle = 0;
  std::uint32_t lane = 0;
  bool idle = true;
  unsigned offset = 0;
  Value value = 0;
  // Brick the pair came from, relative to the window origin.
  WindowBrick brick;
  std::size_t wx = 0;
  std::size_t wy = 0;

  bool operator==(const DispatchEvent&) const = default;
};

// `cycle,lane,offset,value` or `cycle,lane,IDLE`.
std::string trace_line(const DispatchEvent& e);
void write_trace(std::ostream& os, std::span<const DispatchEvent> events);

// Per-window dispatcher state machine. Not thread-safe; use one per thread.
class Dispatcher {
 public:
  Dispatcher(ActivationSource source, const LayerConfig& layer, const DispatchConfig& cfg);

  // Dispatches window (wx, wy), replacing `events` with that window's events
  // in (cycle, lane) order, cycle stamps starting at `start_cycle`. When
  // `products` is given, positions whose CanSkip bit is set are not sent.
  // Returns the window's cycle count.
  std::uint64_t run_window(std::size_t wx, std::size_t wy, const IsProductTable* products,
                           std::uint64_t start_cycle, std::vector<DispatchEvent>& events);

  const SliceAssignment& slices() const { return slices_; }
  // Bricks fetched so far from each bank.
  std::span<const std::uint64_t> fetch_pointers() const { return fetch_pointers_; }

 private:
  void fetch(std::size_t lane, std::size_t wx, std::size_t wy, const WindowBrick& b,
             const IsProductTable* products);

  ActivationSource source_;
  LayerConfig layer_;
  DispatchConfig cfg_;
  SliceAssignment slices_;
  std::vector<BrickBuffer> buffers_;
  std::vector<std::uint64_t> fetch_pointers_;
  std::vector<OffsetValue> scratch_;
  std::vector<Value> brick_scratch_;
};

struct DispatchRun {
  std::vector<DispatchEvent> events;
  std::uint64_t cycles = 0;
  std::uint64_t broadcasts = 0;
  std::vector<std::uint64_t> lane_busy;
};

// Dispatches every window of the layer once, windows in row order.
DispatchRun run_dispatch(ActivationSource source, const LayerConfig& layer,
                         const DispatchConfig& cfg, const IsProductTable* products = nullptr);

// Per-lane (offset, value) sequences of a run, idle markers dropped.
std::vector<std::vector<OffsetValue>> lane_streams(const DispatchRun& run, std::size_t lanes);

}  // namespace cnv
