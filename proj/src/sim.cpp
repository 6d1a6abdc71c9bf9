#include "cnv/sim.hpp"

#include <algorithm>
#include <memory>
#include <optional>

namespace cnv {

std::string to_string(Arch a) {
  switch (a) {
    case Arch::Baseline:
      return "baseline";
    case Arch::Cnv:
      return "cnv";
    case Arch::Cnv2:
      return "cnv2";
  }
  return "?";
}

Arch parse_arch(std::string_view s) {
  if (s == "baseline") return Arch::Baseline;
  if (s == "cnv") return Arch::Cnv;
  if (s == "cnv2") return Arch::Cnv2;
  throw ValidationError("unknown architecture '" + std::string(s) + "' (baseline|cnv|cnv2)");
}

std::string to_string(GroupScope g) { return g == GroupScope::AllResident ? "resident" : "tile"; }

std::string to_string(BaselineAssignment b) {
  return b == BaselineAssignment::BrickInterleaved ? "brick" : "activation";
}

GroupScope parse_group_scope(std::string_view s) {
  if (s == "resident") return GroupScope::AllResident;
  if (s == "tile") return GroupScope::PerTile;
  throw ValidationError("unknown IS product scope '" + std::string(s) + "' (resident|tile)");
}

BaselineAssignment parse_baseline_assignment(std::string_view s) {
  if (s == "brick") return BaselineAssignment::BrickInterleaved;
  if (s == "activation") return BaselineAssignment::ActivationInterleaved;
  throw ValidationError("unknown baseline assignment '" + std::string(s) + "' (brick|activation)");
}

DispatchConfig TileConfig::dispatch() const {
  DispatchConfig d;
  d.lanes = lanes;
  d.brick = brick;
  d.policy = sync;
  d.empty_cost = empty_cost;
  d.fetch_latency = fetch_latency;
  d.banks = BankLayout::one_per_lane(lanes);
  return d;
}

void TileConfig::validate() const {
  if (tiles == 0 || filters_per_tile == 0) throw ConfigError("tile geometry must be positive");
  dispatch().validate();
}

std::uint64_t dense_macs(const LayerConfig& layer) {
  return std::uint64_t{layer.windows()} * layer.window_volume() * layer.filter_count;
}

FootprintReport encode_outputs(const OutTensor& output, Format format, const IneffCriterion& crit,
                               std::size_t brick) {
  return footprint_bits(format, output, crit, BrickFormat::for_brick(static_cast<unsigned>(brick)));
}

namespace {

// Filters [first, last) fed by one dispatcher stream; `products` is null when
// weights are not consulted.
struct Stream {
  std::size_t first = 0;
  std::size_t last = 0;
  const IsProductTable* products = nullptr;
};

struct Totals {
  std::uint64_t cycles = 0;
  std::uint64_t broadcasts = 0;
  std::uint64_t macs = 0;
  std::uint64_t slots = 0;  // sum of window cycles x streams
  std::vector<std::uint64_t> busy;
};

void check_inputs(const ActTensor& acts, const FilterSet& filters, const LayerConfig& layer,
                  const TileConfig& tile) {
  tile.validate();
  layer.validate(acts, filters);
  layer.validate(tile.brick);
}

void finish_report(CycleReport& r, const Totals& t, const LayerConfig& layer, std::size_t lanes) {
  r.cycles = t.cycles;
  r.broadcasts = t.broadcasts;
  r.macs_performed = t.macs;
  r.macs_skipped = dense_macs(layer) - t.macs;
  r.lane_utilization.assign(lanes, 0.0);
  std::uint64_t busy = 0;
  for (std::size_t l = 0; l < lanes; ++l) {
    busy += t.busy[l];
    if (t.slots > 0) r.lane_utilization[l] = static_cast<double>(t.busy[l]) / static_cast<double>(t.slots);
  }
  r.utilization = t.slots > 0 ? static_cast<double>(busy) / static_cast<double>(t.slots * lanes) : 0.0;
}

// Runs the dispatcher over every window of every pass and executes the
// broadcast pairs against the resident filters.
Totals execute(ActivationSource source, const FilterSet& filters, const LayerConfig& layer,
               const TileConfig& tile, const std::vector<std::vector<Stream>>& passes,
               const SimOptions& opts, OutTensor& out) {
  const DispatchConfig dcfg = tile.dispatch();
  const std::size_t L = tile.lanes;
  const std::size_t B = tile.brick;
  const std::size_t ox = layer.out_x();
  const auto windows = static_cast<std::int64_t>(layer.windows());

  Totals totals;
  totals.busy.assign(L, 0);

  auto apply = [&](const std::vector<DispatchEvent>& events, const Stream& s,
                   std::vector<std::uint64_t>& busy, std::uint64_t& broadcasts) {
    for (const auto& e : events) {
      if (e.idle) continue;
      ++broadcasts;
      ++busy[e.lane];
      const std::size_t i = e.brick.brick_index * B + e.offset;
      const auto v = static_cast<Accum>(e.value);
      for (std::size_t f = s.first; f < s.last; ++f) {
        out(e.wx, e.wy, f) += v * static_cast<Accum>(filters(f, e.brick.fx, e.brick.fy, i));
      }
    }
  };

  for (const auto& streams : passes) {
    totals.cycles += tile.fetch_latency;

    if (opts.trace != nullptr) {
      Dispatcher d(source, layer, dcfg);
      std::vector<DispatchEvent> events;
      for (std::int64_t w = 0; w < windows; ++w) {
        const std::size_t wx = static_cast<std::size_t>(w) % ox;
        const std::size_t wy = static_cast<std::size_t>(w) / ox;
        std::uint64_t window_cycles = 0;
        for (const auto& s : streams) {
          const auto c = d.run_window(wx, wy, s.products, totals.cycles, events);
          window_cycles = std::max(window_cycles, c);
          const std::uint64_t before = totals.broadcasts;
          apply(events, s, totals.busy, totals.broadcasts);
          totals.macs += (totals.broadcasts - before) * (s.last - s.first);
          opts.trace->insert(opts.trace->end(), events.begin(), events.end());
        }
        totals.cycles += window_cycles;
        totals.slots += window_cycles * streams.size();
      }
      continue;
    }

    std::uint64_t cycles = 0;
    std::uint64_t broadcasts = 0;
    std::uint64_t macs = 0;
    std::uint64_t slots = 0;
#pragma omp parallel if (opts.parallel)
    {
      Dispatcher d(source, layer, dcfg);
      std::vector<DispatchEvent> events;
      std::vector<std::uint64_t> busy(L, 0);
#pragma omp for schedule(dynamic, 8) reduction(+ : cycles, broadcasts, macs, slots)
      for (std::int64_t w = 0; w < windows; ++w) {
        const std::size_t wx = static_cast<std::size_t>(w) % ox;
        const std::size_t wy = static_cast<std::size_t>(w) / ox;
        std::uint64_t window_cycles = 0;
        for (const auto& s : streams) {
          window_cycles = std::max(window_cycles, d.run_window(wx, wy, s.products, 0, events));
          std::uint64_t sent = 0;
          apply(events, s, busy, sent);
          broadcasts += sent;
          macs += sent * (s.last - s.first);
        }
        cycles += window_cycles;
        slots += window_cycles * streams.size();
      }
#pragma omp critical
      for (std::size_t l = 0; l < L; ++l) totals.busy[l] += busy[l];
    }
    totals.cycles += cycles;
    totals.broadcasts += broadcasts;
    totals.macs += macs;
    totals.slots += slots;
  }
  return totals;
}

std::vector<std::vector<Stream>> plain_passes(const LayerConfig& layer, const TileConfig& tile) {
  std::vector<std::vector<Stream>> passes;
  const std::size_t R = tile.resident_filters();
  for (std::size_t first = 0; first < layer.filter_count; first += R) {
    passes.push_back({Stream{first, std::min(layer.filter_count, first + R), nullptr}});
  }
  return passes;
}

SimResult run_activation_interleaved(const ActTensor& acts, const FilterSet& filters,
                                     const LayerConfig& layer, const TileConfig& tile,
                                     const SimOptions& opts) {
  const std::size_t L = tile.lanes;
  const std::size_t V = layer.window_volume();
  const std::uint64_t per_window = (V + L - 1) / L;
  const std::size_t passes = tile.passes(layer.filter_count);

  SimResult r;
  r.report.arch = Arch::Baseline;
  r.report.passes = passes;
  r.output = dense_conv(acts, filters, layer);

  Totals t;
  t.cycles = passes * (tile.fetch_latency + layer.windows() * per_window);
  t.slots = passes * layer.windows() * per_window;
  t.broadcasts = std::uint64_t{passes} * layer.windows() * V;
  t.macs = dense_macs(layer);
  t.busy.assign(L, 0);
  for (std::size_t l = 0; l < L; ++l) {
    t.busy[l] = std::uint64_t{passes} * layer.windows() * (V / L + (l < V % L ? 1 : 0));
  }
  finish_report(r.report, t, layer, L);
  r.report.footprint_bits =
      encode_outputs(r.output, opts.output_format, opts.output_criterion, tile.brick).total_bits;
  return r;
}

struct ActivationFeed {
  std::optional<EncodedStore> store;
  ActivationSource source;
};

ActivationFeed make_feed(const ActTensor& acts, const IneffCriterion& crit, const TileConfig& tile,
                         const SimOptions& opts) {
  ActivationFeed feed{std::nullopt, DetectOnFetch{&acts, crit}};
  if (opts.activation_format != Format::Raw) {
    feed.store = EncodedStore::encode(opts.activation_format, acts, crit,
                                      BrickFormat::for_brick(static_cast<unsigned>(tile.brick)));
  }
  return feed;
}

}  // namespace

SimResult run_baseline(const ActTensor& acts, const FilterSet& filters, const LayerConfig& layer,
                       const TileConfig& tile, const SimOptions& opts) {
  check_inputs(acts, filters, layer, tile);
  if (tile.baseline == BaselineAssignment::ActivationInterleaved) {
    return run_activation_interleaved(acts, filters, layer, tile, opts);
  }
  const auto passes = plain_passes(layer, tile);
  SimResult r;
  r.output = OutTensor(layer.out_x(), layer.out_y(), layer.filter_count);
  const Totals t = execute(DenseFetch{&acts}, filters, layer, tile, passes, opts, r.output);
  r.report.arch = Arch::Baseline;
  r.report.passes = passes.size();
  finish_report(r.report, t, layer, tile.lanes);
  r.report.footprint_bits =
      encode_outputs(r.output, opts.output_format, opts.output_criterion, tile.brick).total_bits;
  return r;
}

SimResult run_cnv(const ActTensor& acts, const FilterSet& filters, const LayerConfig& layer,
                  const TileConfig& tile, const IneffCriterion& act_crit, const SimOptions& opts) {
  check_inputs(acts, filters, layer, tile);
  auto feed = make_feed(acts, act_crit, tile, opts);
  if (feed.store) feed.source = &*feed.store;
  const auto passes = plain_passes(layer, tile);
  SimResult r;
  r.output = OutTensor(layer.out_x(), layer.out_y(), layer.filter_count);
  const Totals t = execute(feed.source, filters, layer, tile, passes, opts, r.output);
  r.report.arch = Arch::Cnv;
  r.report.passes = passes.size();
  finish_report(r.report, t, layer, tile.lanes);
  r.report.footprint_bits =
      encode_outputs(r.output, opts.output_format, opts.output_criterion, tile.brick).total_bits;
  return r;
}

SimResult run_cnv2(const ActTensor& acts, const FilterSet& filters, const LayerConfig& layer,
                   const TileConfig& tile, const IneffCriterion& act_crit,
                   const IneffCriterion& weight_crit, const SimOptions& opts) {
  check_inputs(acts, filters, layer, tile);
  auto feed = make_feed(acts, act_crit, tile, opts);
  if (feed.store) feed.source = &*feed.store;

  // IS products are weight constants: precompute one table per filter group.
  const std::size_t R = tile.resident_filters();
  const std::size_t group = tile.group == GroupScope::AllResident ? R : tile.filters_per_tile;
  std::vector<std::unique_ptr<IsProductTable>> tables;
  std::vector<std::vector<Stream>> passes;
  for (std::size_t first = 0; first < layer.filter_count; first += R) {
    const std::size_t pass_end = std::min(layer.filter_count, first + R);
    std::vector<Stream> streams;
    for (std::size_t g = first; g < pass_end; g += group) {
      const std::size_t g_end = std::min(pass_end, g + group);
      tables.push_back(std::make_unique<IsProductTable>(filters, g, g_end, tile.brick, weight_crit));
      streams.push_back({g, g_end, tables.back().get()});
    }
    passes.push_back(std::move(streams));
  }

  SimResult r;
  r.output = OutTensor(layer.out_x(), layer.out_y(), layer.filter_count);
  const Totals t = execute(feed.source, filters, layer, tile, passes, opts, r.output);
  r.report.arch = Arch::Cnv2;
  r.report.passes = passes.size();
  finish_report(r.report, t, layer, tile.lanes);
  r.report.footprint_bits =
      encode_outputs(r.output, opts.output_format, opts.output_criterion, tile.brick).total_bits;
  return r;
}

OutTensor expected_output(Arch arch, const ActTensor& acts, const FilterSet& filters,
                          const LayerConfig& layer, const TileConfig& tile,
                          const IneffCriterion& act_crit, const IneffCriterion& weight_crit) {
  check_inputs(acts, filters, layer, tile);
  if (arch == Arch::Baseline) return dense_conv(acts, filters, layer);
  ActTensor effective = acts;
  for (auto& v : effective.values()) {
    if (act_crit.ineffectual(v)) v = 0;
  }
  if (arch == Arch::Cnv) return dense_conv(effective, filters, layer);

  const std::size_t R = tile.resident_filters();
  const std::size_t group = tile.group == GroupScope::AllResident ? R : tile.filters_per_tile;
  OutTensor out(layer.out_x(), layer.out_y(), layer.filter_count);
  std::vector<char> dropped(filters.shape().volume());
  for (std::size_t first = 0; first < layer.filter_count; first += R) {
    const std::size_t pass_end = std::min(layer.filter_count, first + R);
    for (std::size_t g = first; g < pass_end; g += group) {
      const std::size_t g_end = std::min(pass_end, g + group);
      for (std::size_t k = 0; k < dropped.size(); ++k) {
        bool all = true;
        for (std::size_t f = g; f < g_end && all; ++f) all = weight_crit.ineffectual(filters.filter(f)[k]);
        dropped[k] = all;
      }
      for (std::size_t wx = 0; wx < layer.out_x(); ++wx) {
        for (std::size_t wy = 0; wy < layer.out_y(); ++wy) {
          for (std::size_t f = g; f < g_end; ++f) {
            Accum sum = 0;
            for (std::size_t fx = 0; fx < layer.filter_x; ++fx) {
              for (std::size_t fy = 0; fy < layer.filter_y; ++fy) {
                for (std::size_t i = 0; i < layer.input.depth; ++i) {
                  const std::size_t k = (fx * layer.filter_y + fy) * layer.input.depth + i;
                  if (dropped[k]) continue;
                  sum += Accum{effective(wx * layer.stride + fx, wy * layer.stride + fy, i)} *
                         Accum{filters(f, fx, fy, i)};
                }
              }
            }
            out(wx, wy, f) = sum;
          }
        }
      }
    }
  }
  return out;
}

}  // namespace cnv
