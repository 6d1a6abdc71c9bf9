#include "cnv/dispatch.hpp"

#include <algorithm>
#include <ostream>

namespace cnv {

std::string to_string(SyncPolicy p) {
  return p == SyncPolicy::WindowSync ? "window" : "lockstep";
}

std::string to_string(EmptyBrickCost c) {
  return c == EmptyBrickCost::ZeroCycles ? "zero" : "one";
}

SyncPolicy parse_sync_policy(std::string_view s) {
  if (s == "window") return SyncPolicy::WindowSync;
  if (s == "lockstep") return SyncPolicy::BricksetLockstep;
  throw ValidationError("unknown sync policy '" + std::string(s) + "' (window|lockstep)");
}

EmptyBrickCost parse_empty_brick_cost(std::string_view s) {
  if (s == "zero") return EmptyBrickCost::ZeroCycles;
  if (s == "one") return EmptyBrickCost::OneCycle;
  throw ValidationError("unknown empty-brick cost '" + std::string(s) + "' (zero|one)");
}

void BrickBuffer::load(std::span<const Value> values, const EffectualMask& send) {
  values_.assign(values.begin(), values.end());
  remaining_ = send;
}

OffsetValue BrickBuffer::pop() {
  const unsigned j = remaining_.leading_one();
  remaining_.reset(j);
  return {j, values_[j]};
}

namespace {

std::vector<OffsetValue> drain(std::span<const Value> brick, const EffectualMask& send) {
  BrickBuffer bb;
  bb.load(brick, send);
  std::vector<OffsetValue> out;
  while (!bb.drained()) out.push_back(bb.pop());
  return out;
}

}  // namespace

std::vector<OffsetValue> stream_brick(std::span<const Value> brick, const IneffCriterion& crit) {
  return drain(brick, effectual_mask(brick, crit));
}

std::vector<OffsetValue> stream_brick_weightaware(std::span<const Value> brick,
                                                  const IneffCriterion& act_crit,
                                                  const IsProduct& prod) {
  const auto skip = can_skip(effectual_mask(brick, act_crit), prod);
  return drain(brick, EffectualMask(skip.width(), ~skip.bits()));
}

void DispatchConfig::validate() const {
  if (lanes == 0) throw ConfigError("lane count must be positive");
  if (brick == 0 || brick > kMaxBrick) throw ConfigError("brick size must be in [1, 64]");
  if (banks.nm_banks != lanes) {
    throw ConfigError("bank layout needs one NM bank per lane (" + std::to_string(lanes) +
                      "), got " + std::to_string(banks.nm_banks));
  }
}

std::string trace_line(const DispatchEvent& e) {
  std::string s = std::to_string(e.cycle) + ',' + std::to_string(e.lane) + ',';
  if (e.idle) return s + "IDLE";
  return s + std::to_string(e.offset) + ',' + std::to_string(e.value);
}

void write_trace(std::ostream& os, std::span<const DispatchEvent> events) {
  for (const auto& e : events) os << trace_line(e) << '\n';
}

Dispatcher::Dispatcher(ActivationSource source, const LayerConfig& layer,
                       const DispatchConfig& cfg)
    : source_(source), layer_(layer), cfg_(cfg) {
  cfg_.validate();
  layer_.validate(cfg_.brick);
  if (const auto* store = std::get_if<const EncodedStore*>(&source_)) {
    if ((*store)->dims() != layer_.input || (*store)->brick_format().brick != cfg_.brick) {
      throw FormatError(FormatErrorKind::Inconsistent,
                        "encoded store does not match the layer geometry");
    }
  } else {
    const ActTensor* acts = std::holds_alternative<DetectOnFetch>(source_)
                                ? std::get<DetectOnFetch>(source_).acts
                                : std::get<DenseFetch>(source_).acts;
    if (acts->dims() != layer_.input) throw ConfigError("activation tensor does not match layer");
  }
  slices_ = slice_window(layer_, cfg_.lanes, cfg_.brick);
  buffers_.resize(cfg_.lanes);
  fetch_pointers_.assign(cfg_.banks.nm_banks, 0);
  brick_scratch_.resize(cfg_.brick);
}

void Dispatcher::fetch(std::size_t lane, std::size_t wx, std::size_t wy, const WindowBrick& b,
                       const IsProductTable* products) {
  const std::size_t x = wx * layer_.stride + b.fx;
  const std::size_t y = wy * layer_.stride + b.fy;
  const auto B = static_cast<unsigned>(cfg_.brick);
  ++fetch_pointers_[cfg_.banks.bank_of_lane(lane)];

  EffectualMask send;
  if (const auto* d = std::get_if<DetectOnFetch>(&source_)) {
    const auto values = d->acts->column(x, y).subspan(b.brick_index * B, B);
    std::copy(values.begin(), values.end(), brick_scratch_.begin());
    send = effectual_mask(values, d->crit);
  } else if (const auto* dense = std::get_if<DenseFetch>(&source_)) {
    const auto values = dense->acts->column(x, y).subspan(b.brick_index * B, B);
    std::copy(values.begin(), values.end(), brick_scratch_.begin());
    send = EffectualMask::ones(B);
  } else {
    const EncodedStore* store = std::get<const EncodedStore*>(source_);
    store->brick_pairs(x, y, b.brick_index, scratch_);
    std::fill(brick_scratch_.begin(), brick_scratch_.end(), Value{0});
    send = EffectualMask(B);
    for (const auto& p : scratch_) {
      brick_scratch_[p.offset] = p.value;
      send.set(p.offset);
    }
  }
  if (products != nullptr && !std::holds_alternative<DenseFetch>(source_)) {
    const auto skip = can_skip(send, products->at(b.fx, b.fy, b.brick_index));
    send = EffectualMask(B, ~skip.bits());
  }
  buffers_[lane].load(brick_scratch_, send);
}

std::uint64_t Dispatcher::run_window(std::size_t wx, std::size_t wy,
                                     const IsProductTable* products, std::uint64_t start_cycle,
                                     std::vector<DispatchEvent>& events) {
  events.clear();
  const std::size_t L = cfg_.lanes;
  const bool drain_empty = cfg_.empty_cost == EmptyBrickCost::OneCycle;
  std::uint64_t t = start_cycle;

  auto idle = [&](std::size_t l) {
    DispatchEvent e;
    e.cycle = t;
    e.lane = static_cast<std::uint32_t>(l);
    e.wx = wx;
    e.wy = wy;
    events.push_back(e);
  };
  auto send = [&](std::size_t l, const WindowBrick& b) {
    const OffsetValue p = buffers_[l].pop();
    events.push_back({t, static_cast<std::uint32_t>(l), false, p.offset, p.value, b, wx, wy});
  };

  if (cfg_.policy == SyncPolicy::BricksetLockstep) {
    const std::size_t sets = slices_.max_bricks_per_lane();
    // Lanes without a brick in a set, or whose empty brick has been drained,
    // sit idle until the set completes.
    std::vector<bool> pending_drain(L);
    for (std::size_t s = 0; s < sets; ++s) {
      std::uint64_t cost = 0;
      for (std::size_t l = 0; l < L; ++l) {
        pending_drain[l] = false;
        if (s < slices_.lanes[l].size()) {
          fetch(l, wx, wy, slices_.lanes[l][s], products);
          std::uint64_t c = buffers_[l].remaining().count();
          if (c == 0 && drain_empty) {
            c = 1;
            pending_drain[l] = true;
          }
          cost = std::max(cost, c);
        } else {
          buffers_[l].load({}, EffectualMask(0));
        }
      }
      for (std::uint64_t k = 0; k < cost; ++k, ++t) {
        for (std::size_t l = 0; l < L; ++l) {
          if (!buffers_[l].drained()) {
            send(l, slices_.lanes[l][s]);
          } else {
            pending_drain[l] = false;
            idle(l);
          }
        }
      }
    }
    return t - start_cycle;
  }

  // WindowSync: each lane walks its own slice through its own bank.
  std::vector<std::size_t> next(L, 0);
  std::vector<bool> pending_drain(L, false);
  std::vector<bool> done(L, false);
  for (std::size_t l = 0; l < L; ++l) buffers_[l].load({}, EffectualMask(0));

  // Advances lane l to a brick with work (or a drain step); false when the
  // slice is exhausted.
  auto ready = [&](std::size_t l) {
    while (buffers_[l].drained() && !pending_drain[l]) {
      if (next[l] >= slices_.lanes[l].size()) return false;
      fetch(l, wx, wy, slices_.lanes[l][next[l]], products);
      ++next[l];
      if (buffers_[l].drained() && drain_empty) pending_drain[l] = true;
    }
    return true;
  };

  for (;;) {
    bool any = false;
    for (std::size_t l = 0; l < L; ++l) {
      if (!done[l] && !ready(l)) done[l] = true;
      any = any || !done[l];
    }
    if (!any) break;
    for (std::size_t l = 0; l < L; ++l) {
      if (done[l]) {
        idle(l);
      } else if (pending_drain[l]) {
        pending_drain[l] = false;
        idle(l);
      } else {
        send(l, slices_.lanes[l][next[l] - 1]);
      }
    }
    ++t;
  }
  return t - start_cycle;
}

DispatchRun run_dispatch(ActivationSource source, const LayerConfig& layer,
                         const DispatchConfig& cfg, const IsProductTable* products) {
  Dispatcher d(source, layer, cfg);
  DispatchRun run;
  run.lane_busy.assign(cfg.lanes, 0);
  run.cycles = cfg.fetch_latency;
  std::vector<DispatchEvent> window_events;
  for (std::size_t wy = 0; wy < layer.out_y(); ++wy) {
    for (std::size_t wx = 0; wx < layer.out_x(); ++wx) {
      run.cycles += d.run_window(wx, wy, products, run.cycles, window_events);
      for (const auto& e : window_events) {
        if (!e.idle) {
          ++run.broadcasts;
          ++run.lane_busy[e.lane];
        }
      }
      run.events.insert(run.events.end(), window_events.begin(), window_events.end());
    }
  }
  return run;
}

std::vector<std::vector<OffsetValue>> lane_streams(const DispatchRun& run, std::size_t lanes) {
  std::vector<std::vector<OffsetValue>> out(lanes);
  for (const auto& e : run.events) {
    if (!e.idle) out.at(e.lane).push_back({e.offset, e.value});
  }
  return out;
}

}  // namespace cnv
