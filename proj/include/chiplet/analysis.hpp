#pragma once

/**
 * @file analysis.hpp
 * @brief Paired MCM / monolithic populations and the E_avg comparison.
 *
 * For one McmSpec the pipeline fabricates B monolithic devices of the same
 * footprint and B*k*m chiplets (equal wafer area), keeps the collision-free
 * ones, assigns on-chip noise, ranks the chiplets and assembles MCMs. The
 * number of MCMs is capped at the number of collision-free monolithic
 * devices so both sides are compared at equal device count; link noise is
 * applied later per ratio, on copies, so one assembly serves every ratio.
 */

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "chiplet/device.hpp"
#include "chiplet/fabsim.hpp"
#include "chiplet/hexlattice.hpp"
#include "chiplet/mcm.hpp"
#include "chiplet/noise.hpp"
#include "chiplet/parallel.hpp"
#include "chiplet/rng.hpp"

namespace chiplet {

struct PopulationOptions {
  std::uint64_t batch = 1000;  // monolithic devices fabricated; chiplets = batch * k * m
  std::uint64_t seed = 0;
  unsigned workers = 1;
  int max_reconfig = kDefaultMaxReconfig;
  bool cap_to_monolithic = true;
  double bump_success = kDefaultBumpSuccess;
  int bumps_per_link_qubit = kDefaultBumpsPerLinkQubit;
};

struct PairedPopulation {
  McmSpec spec;
  std::shared_ptr<const Topology> mono_topology;
  YieldEstimate mono_yield;
  YieldEstimate chiplet_yield;
  std::vector<DeviceInstance> mono;  // collision-free, noise assigned
  std::uint64_t seed = 0;
  std::uint64_t assembly_seed = 0;
  std::optional<McmLayout> layout;
  AssemblyResult assembly;           // link edges still unassigned

  bool feasible() const noexcept { return !mono.empty(); }
};

inline std::uint64_t chiplet_population_seed(std::uint64_t seed, int chiplet_size) {
  return derive_key(seed, {stream::kChipletBatch, static_cast<std::uint64_t>(chiplet_size)});
}

inline std::uint64_t mono_population_seed(std::uint64_t seed, const McmSpec& spec) {
  return derive_key(seed, {stream::kMonoBatch, static_cast<std::uint64_t>(spec.chiplet.size),
                           static_cast<std::uint64_t>(spec.rows), static_cast<std::uint64_t>(spec.cols)});
}

/// Samples the collision-free subset of a batch and assigns noise to each.
/// Output order follows trial index.
inline std::vector<DeviceInstance> collision_free_devices(std::shared_ptr<const Topology> t, const FrequencyPlan& plan,
                                                          const DetuningBins& bins, std::uint64_t batch,
                                                          std::uint64_t seed, unsigned workers,
                                                          YieldEstimate* yield_out = nullptr) {
  const auto flags = collision_free_flags(*t, plan, batch, seed, workers);
  std::vector<std::uint64_t> trials;
  for (std::uint64_t i = 0; i < batch; ++i) {
    if (flags[i]) trials.push_back(i);
  }
  if (yield_out) *yield_out = make_yield_estimate(static_cast<int>(t->qubit_count()), trials.size(), batch);
  std::vector<DeviceInstance> out(trials.size());
  const LinkNoiseConfig no_links;
  parallel_chunks(trials.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      DeviceInstance d = sample_frequencies(t, plan, seed, trials[i]);
      out[i] = assign_device_noise(std::move(d), bins, no_links, derive_key(seed, {stream::kNoise, trials[i]}));
    }
  });
  return out;
}

inline PairedPopulation build_population(const McmSpec& spec, const FrequencyPlan& plan, const DetuningBins& bins,
                                         const PopulationOptions& opt) {
  if (opt.batch < 1) throw std::invalid_argument("batch must be >= 1");
  plan.validate();
  PairedPopulation pop;
  pop.spec = spec;
  pop.seed = opt.seed;
  pop.mono_topology = std::make_shared<const Topology>(build_monolithic(spec));
  pop.mono = collision_free_devices(pop.mono_topology, plan, bins, opt.batch, mono_population_seed(opt.seed, spec),
                                    opt.workers, &pop.mono_yield);

  const auto chip = std::make_shared<const Topology>(build_chiplet(spec.chiplet));
  const std::uint64_t chiplet_batch = opt.batch * static_cast<std::uint64_t>(spec.chiplet_count());
  auto chiplets = collision_free_devices(chip, plan, bins, chiplet_batch,
                                         chiplet_population_seed(opt.seed, spec.chiplet.size), opt.workers,
                                         &pop.chiplet_yield);
  const ChipletBin bin = rank_chiplets(std::move(chiplets));

  pop.layout = McmLayout::of(spec);
  pop.assembly_seed = derive_key(opt.seed, {stream::kAssembly, static_cast<std::uint64_t>(spec.chiplet.size),
                                            static_cast<std::uint64_t>(spec.rows), static_cast<std::uint64_t>(spec.cols)});
  AssemblyOptions aopt;
  aopt.max_reconfig = opt.max_reconfig;
  aopt.seed = pop.assembly_seed;
  aopt.fabricated_batch = chiplet_batch;
  aopt.bump_success = opt.bump_success;
  aopt.bumps_per_link_qubit = opt.bumps_per_link_qubit;
  if (opt.cap_to_monolithic) {
    if (pop.mono.empty()) {
      pop.assembly.fabricated_batch = chiplet_batch;
      pop.assembly.leftovers = bin.size();
      pop.assembly.link_qubits_per_mcm = pop.layout->link_qubit_count;
      return pop;
    }
    aopt.max_mcms = pop.mono.size();
  }
  pop.assembly = assemble_batch(bin, *pop.layout, plan, aopt);
  return pop;
}

/// Copies of the assembled MCMs with link infidelities at `ratio`.
inline std::vector<DeviceInstance> mcms_with_link_noise(const PairedPopulation& pop, const DetuningBins& bins,
                                                        double ratio) {
  const LinkNoiseConfig link{ratio};
  link.validate();
  std::vector<DeviceInstance> out = pop.assembly.mcms;
  for (std::size_t i = 0; i < out.size(); ++i) {
    assign_link_noise(out[i], bins, link, mcm_seed(pop.assembly_seed, i));
  }
  return out;
}

inline double mean_avg_infidelity(const std::vector<DeviceInstance>& devices) {
  if (devices.empty()) throw std::invalid_argument("mean_avg_infidelity: no devices");
  double sum = 0.0;
  for (const auto& d : devices) sum += avg_infidelity(d);
  return sum / static_cast<double>(devices.size());
}

struct HeatmapCell {
  int chiplet = 0;
  int n = 0;  // n x n MCM
  double ratio = 0.0;
  bool feasible = false;
  double e_mcm = 0.0;
  double e_mono = 0.0;
  double value = 0.0;  // e_mcm / e_mono
  std::size_t mcm_count = 0;
  std::size_t mono_count = 0;
};

/// E_MCM / E_mono for one population at one link ratio.
inline HeatmapCell heatmap_cell(const PairedPopulation& pop, const DetuningBins& bins, double ratio) {
  HeatmapCell cell;
  cell.chiplet = pop.spec.chiplet.size;
  cell.n = pop.spec.rows;
  cell.ratio = ratio;
  cell.mono_count = pop.mono.size();
  cell.mcm_count = pop.assembly.mcms.size();
  cell.feasible = pop.feasible() && !pop.assembly.mcms.empty();
  if (!cell.feasible) return cell;
  cell.e_mono = mean_avg_infidelity(pop.mono);
  cell.e_mcm = mean_avg_infidelity(mcms_with_link_noise(pop, bins, ratio));
  cell.value = cell.e_mcm / cell.e_mono;
  return cell;
}

/// Square n x n configurations for each chiplet size within the qubit cap.
inline std::vector<McmSpec> square_configs(const std::vector<int>& chiplet_sizes, const std::vector<int>& dims,
                                           int qubit_cap = kDefaultQubitCap) {
  std::vector<McmSpec> out;
  for (int c : chiplet_sizes) {
    for (int n : dims) {
      const McmSpec s{ChipletSpec::of(c), n, n};
      if (s.qubit_count() <= qubit_cap) out.push_back(s);
    }
  }
  return out;
}

/// Heatmap cells in (ratio, chiplet, n) order; cells over the qubit cap are skipped.
inline std::vector<HeatmapCell> infidelity_heatmap(const std::vector<int>& chiplet_sizes, const std::vector<int>& dims,
                                                   const std::vector<double>& ratios, const FrequencyPlan& plan,
                                                   const DetuningBins& bins, const PopulationOptions& opt) {
  std::vector<PairedPopulation> pops;
  for (const McmSpec& s : square_configs(chiplet_sizes, dims)) pops.push_back(build_population(s, plan, bins, opt));
  std::vector<HeatmapCell> cells;
  for (double r : ratios) {
    for (const auto& p : pops) cells.push_back(heatmap_cell(p, bins, r));
  }
  return cells;
}

}  // namespace chiplet
