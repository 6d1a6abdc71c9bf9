#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cnv/dispatch.hpp"
#include "cnv/encodings.hpp"
#include "cnv/sparsity.hpp"
#include "cnv/tensor.hpp"

namespace cnv {

enum class Arch : std::uint8_t { Baseline, Cnv, Cnv2 };

std::string to_string(Arch a);
Arch parse_arch(std::string_view s);

// Which filters an IS product is taken over.
enum class GroupScope : std::uint8_t { AllResident, PerTile };

// How the dense baseline hands activations to lanes.
//   BrickInterleaved: same slices as CNV, every position costs a cycle.
//   ActivationInterleaved: L consecutive window activations per cycle,
//     ceil(Fx*Fy*I / L) cycles per window.
enum class BaselineAssignment : std::uint8_t { BrickInterleaved, ActivationInterleaved };

std::string to_string(GroupScope g);
std::string to_string(BaselineAssignment b);
GroupScope parse_group_scope(std::string_view s);
BaselineAssignment parse_baseline_assignment(std::string_view s);

struct TileConfig {
  std::size_t tiles = 16;
  std::size_t filters_per_tile = 16;
  std::size_t lanes = 16;
  std::size_t brick = 16;
  std::size_t nbin_depth = 64;  // informational
  SyncPolicy sync = SyncPolicy::BricksetLockstep;
  EmptyBrickCost empty_cost = EmptyBrickCost::ZeroCycles;
  GroupScope group = GroupScope::AllResident;
  BaselineAssignment baseline = BaselineAssignment::BrickInterleaved;
  std::size_t fetch_latency = 0;

  std::size_t resident_filters() const { return tiles * filters_per_tile; }
  std::size_t passes(std::size_t filter_count) const {
    return (filter_count + resident_filters() - 1) / resident_filters();
  }
  DispatchConfig dispatch() const;
  void validate() const;
};

struct CycleReport {
  Arch arch = Arch::Baseline;
  std::uint64_t cycles = 0;
  std::uint64_t macs_performed = 0;
  std::uint64_t macs_skipped = 0;
  std::uint64_t broadcasts = 0;
  std::uint64_t footprint_bits = 0;
  // Busy lane-cycles over available lane-cycles, per lane and overall.
  std::vector<double> lane_utilization;
  double utilization = 0.0;
  std::uint64_t passes = 0;

  bool operator==(const CycleReport&) const = default;
};

struct SimOptions {
  // Where the CNV dispatcher reads activations: Raw means detection at
  // fetch time, anything else dispatches from a store in that format.
  Format activation_format = Format::Raw;
  // Output encoding whose footprint lands in CycleReport::footprint_bits.
  Format output_format = Format::Zfnaf;
  IneffCriterion output_criterion;
  bool parallel = true;
  // When set, the run is serial and every dispatch event is recorded.
  std::vector<DispatchEvent>* trace = nullptr;
};

struct SimResult {
  OutTensor output;
  CycleReport report;
};

SimResult run_baseline(const ActTensor& acts, const FilterSet& filters, const LayerConfig& layer,
                       const TileConfig& tile, const SimOptions& opts = {});
SimResult run_cnv(const ActTensor& acts, const FilterSet& filters, const LayerConfig& layer,
                  const TileConfig& tile, const IneffCriterion& act_crit,
                  const SimOptions& opts = {});
SimResult run_cnv2(const ActTensor& acts, const FilterSet& filters, const LayerConfig& layer,
                   const TileConfig& tile, const IneffCriterion& act_crit,
                   const IneffCriterion& weight_crit, const SimOptions& opts = {});

// Footprint of a produced output tensor; the output encoder is off the
// timing path so only storage is reported.
FootprintReport encode_outputs(const OutTensor& output, Format format, const IneffCriterion& crit,
                               std::size_t brick);

// What `arch` must compute, derived straight from the tensors without the
// dispatcher: CNV drops ineffectual activations; CNV2 additionally drops every
// position whose weights are ineffectual across the whole IS product group.
OutTensor expected_output(Arch arch, const ActTensor& acts, const FilterSet& filters,
                          const LayerConfig& layer, const TileConfig& tile,
                          const IneffCriterion& act_crit, const IneffCriterion& weight_crit);

// Ox * Oy * Fx * Fy * I * F.
std::uint64_t dense_macs(const LayerConfig& layer);

}  // namespace cnv
