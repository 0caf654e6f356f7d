#pragma once

/**
 * @file mcm.hpp
 * @brief Known-good-die binning, best-first MCM assembly, bump-bond yield.
 *
 * Assembly walks the sorted bin with a window of k*m chiplets. Each window
 * gets up to `max_reconfig` placements (the sorted order first, then seeded
 * uniform shuffles); the first placement whose link edges add no collision is
 * committed and its chiplets leave the bin. A window with no collision-free
 * placement stays in the bin and the window start advances by one.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "chiplet/collision.hpp"
#include "chiplet/device.hpp"
#include "chiplet/fabsim.hpp"
#include "chiplet/hexlattice.hpp"
#include "chiplet/noise.hpp"
#include "chiplet/rng.hpp"

namespace chiplet {

inline constexpr double kDefaultBumpSuccess = 0.99999960642;
inline constexpr int kDefaultBumpsPerLinkQubit = 25;
inline constexpr int kDefaultMaxReconfig = 100;

/// (s_l ^ bumps) ^ L: probability that all L link qubits bond.
inline double bond_yield_factor(std::int64_t link_qubits, double bump_success = kDefaultBumpSuccess,
                                int bumps_per_link_qubit = kDefaultBumpsPerLinkQubit) {
  if (link_qubits < 0) throw std::invalid_argument("link qubit count must be >= 0");
  if (!(bump_success >= 0.0 && bump_success <= 1.0)) throw std::invalid_argument("bump success must be in [0, 1]");
  return std::pow(std::pow(bump_success, bumps_per_link_qubit), static_cast<double>(link_qubits));
}

/// Per-bump success with the failure probability multiplied by `factor`.
inline double scaled_bump_success(double bump_success, double factor) {
  return std::max(0.0, 1.0 - factor * (1.0 - bump_success));
}

struct ChipletBin {
  struct Entry {
    DeviceInstance device;
    double e_avg = 0.0;
  };

  std::vector<Entry> entries;

  std::size_t size() const noexcept { return entries.size(); }
  bool empty() const noexcept { return entries.empty(); }
};

/// Sorts noise-assigned chiplets by on-chip E_avg (ties by trial index).
inline ChipletBin rank_chiplets(std::vector<DeviceInstance> devices) {
  ChipletBin bin;
  if (devices.empty()) return bin;
  const Topology* first = devices.front().topology.get();
  for (const auto& d : devices) {
    const Topology* t = d.topology.get();
    if (!t) throw std::invalid_argument("rank_chiplets: device without topology");
    if (t != first && (t->qubit_count() != first->qubit_count() || t->edge_count() != first->edge_count())) {
      throw std::invalid_argument("rank_chiplets: devices come from different chiplet specs");
    }
  }
  bin.entries.reserve(devices.size());
  for (auto& d : devices) {
    const double e = avg_on_chip_infidelity(d);
    bin.entries.push_back({std::move(d), e});
  }
  std::stable_sort(bin.entries.begin(), bin.entries.end(), [](const auto& x, const auto& y) {
    if (x.e_avg != y.e_avg) return x.e_avg < y.e_avg;
    return x.device.trial_index < y.device.trial_index;
  });
  return bin;
}

/// Stitched topology plus the collision sites that involve a link edge.
struct McmLayout {
  McmSpec spec;
  std::shared_ptr<const Topology> topology;
  std::size_t chiplet_qubits = 0;
  std::size_t chiplet_edges = 0;
  std::vector<CollisionSites::Pair> link_pairs;
  std::vector<CollisionSites::Spectator> link_spectators;
  std::size_t link_qubit_count = 0;

  static McmLayout of(const McmSpec& spec, int qubit_cap = 0) {
    McmLayout l;
    l.spec = spec;
    auto t = std::make_shared<const Topology>(stitch_mcm(spec, qubit_cap));
    const Topology chip = build_chiplet(spec.chiplet);
    l.chiplet_qubits = chip.qubit_count();
    l.chiplet_edges = chip.edge_count();
    for (const Edge& e : t->edges()) {
      if (e.is_link) l.link_pairs.push_back({e.control, e.target()});
    }
    for (const auto& s : CollisionSites::of(*t).spectators) {
      const bool touches_link = t->edge(*t->find_edge(s.control, s.j)).is_link ||
                                t->edge(*t->find_edge(s.control, s.k)).is_link;
      if (touches_link) l.link_spectators.push_back(s);
    }
    l.link_qubit_count = t->link_qubits().size();
    l.topology = std::move(t);
    return l;
  }
};

/// Combines k*m chiplets (placement[slot] = index into `chiplets`) into one
/// device. On-chip infidelities are copied when every chiplet has them; link
/// edges are left as NaN until assign_link_noise.
inline DeviceInstance build_mcm_device(const McmLayout& layout, std::span<const DeviceInstance* const> chiplets,
                                       std::span<const std::size_t> placement) {
  const std::size_t slots = static_cast<std::size_t>(layout.spec.chiplet_count());
  if (chiplets.size() != slots || placement.size() != slots) throw std::invalid_argument("chiplet count must equal k*m");
  DeviceInstance d;
  d.topology = layout.topology;
  d.freq.resize(layout.topology->qubit_count());
  const bool noisy = std::all_of(chiplets.begin(), chiplets.end(), [](const DeviceInstance* c) { return c->has_noise(); });
  if (noisy) d.edge_infidelity.assign(layout.topology->edge_count(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t slot = 0; slot < slots; ++slot) {
    const DeviceInstance& c = *chiplets[placement[slot]];
    std::copy(c.freq.begin(), c.freq.end(), d.freq.begin() + static_cast<std::ptrdiff_t>(slot * layout.chiplet_qubits));
    if (noisy) {
      std::copy(c.edge_infidelity.begin(), c.edge_infidelity.end(),
                d.edge_infidelity.begin() + static_cast<std::ptrdiff_t>(slot * layout.chiplet_edges));
    }
  }
  return d;
}

struct AttemptResult {
  std::optional<DeviceInstance> mcm;
  int attempts = 0;  // placements tried before success, or all of them on failure
  std::vector<std::size_t> placement;

  bool success() const noexcept { return mcm.has_value(); }
};

/// Searches up to `max_reconfig` placements for one whose links are collision-free.
inline AttemptResult attempt_mcm(std::span<const DeviceInstance* const> chiplets, const McmLayout& layout,
                                 int max_reconfig, std::uint64_t seed, const FrequencyPlan& plan) {
  const std::size_t slots = static_cast<std::size_t>(layout.spec.chiplet_count());
  if (chiplets.size() != slots) throw std::invalid_argument("attempt_mcm: need exactly k*m chiplets");
  if (max_reconfig < 1) throw std::invalid_argument("attempt_mcm: max_reconfig must be >= 1");
  for (const DeviceInstance* c : chiplets) {
    if (!c || c->freq.size() != layout.chiplet_qubits) throw std::invalid_argument("attempt_mcm: chiplet does not match spec");
  }
  const std::size_t cq = layout.chiplet_qubits;
  std::vector<std::size_t> placement(slots);
  std::iota(placement.begin(), placement.end(), std::size_t{0});
  auto f = [&](QubitId q) { return chiplets[placement[q / cq]]->freq[q % cq]; };

  for (int attempt = 0; attempt < max_reconfig; ++attempt) {
    if (attempt > 0) {
      std::iota(placement.begin(), placement.end(), std::size_t{0});
      CounterRng rng(seed, {stream::kShuffle, static_cast<std::uint64_t>(attempt)});
      rng.shuffle(placement);
    }
    bool ok = true;
    for (const auto& p : layout.link_pairs) {
      if (!pair_ok(f(p.control), f(p.target), plan.alpha, plan.thresholds)) {
        ok = false;
        break;
      }
    }
    for (std::size_t i = 0; ok && i < layout.link_spectators.size(); ++i) {
      const auto& s = layout.link_spectators[i];
      ok = spectator_ok(f(s.control), f(s.j), f(s.k), plan.alpha, plan.thresholds);
    }
    if (ok) {
      AttemptResult r;
      r.attempts = attempt;
      r.placement = placement;
      r.mcm = build_mcm_device(layout, chiplets, placement);
      return r;
    }
  }
  AttemptResult r;
  r.attempts = max_reconfig;
  return r;
}

struct AssemblyOptions {
  int max_reconfig = kDefaultMaxReconfig;
  std::uint64_t seed = 0;
  std::size_t max_mcms = 0;             // 0: no limit
  std::uint64_t fabricated_batch = 0;   // denominator of post-assembly yield; 0: bin size
  double bump_success = kDefaultBumpSuccess;
  int bumps_per_link_qubit = kDefaultBumpsPerLinkQubit;
};

struct AssemblyResult {
  std::vector<DeviceInstance> mcms;
  std::vector<std::vector<std::size_t>> bin_indices;  // per MCM, slot order
  std::size_t chiplets_used = 0;
  std::size_t leftovers = 0;
  std::map<int, std::size_t> reconfig_histogram;  // reconfigurations needed -> MCM count
  std::size_t failed_windows = 0;
  std::size_t link_qubits_per_mcm = 0;  // L in the bond model
  double bond_yield_factor = 1.0;
  std::uint64_t fabricated_batch = 0;
  double post_assembly_yield = 0.0;
};

/// Seed for everything specific to the i-th assembled MCM (links, lineage).
inline std::uint64_t mcm_seed(std::uint64_t seed, std::size_t mcm_index) {
  return derive_key(seed, {stream::kAssembly, 0x4d434dULL, mcm_index});
}

inline AssemblyResult assemble_batch(const ChipletBin& bin, const McmLayout& layout, const FrequencyPlan& plan,
                                     const AssemblyOptions& opt = {}) {
  const std::size_t slots = static_cast<std::size_t>(layout.spec.chiplet_count());
  AssemblyResult result;
  result.fabricated_batch = opt.fabricated_batch ? opt.fabricated_batch : bin.size();
  result.link_qubits_per_mcm = layout.link_qubit_count;
  result.bond_yield_factor =
      bond_yield_factor(static_cast<std::int64_t>(layout.link_qubit_count), opt.bump_success, opt.bumps_per_link_qubit);

  std::vector<std::size_t> remaining(bin.size());
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  std::size_t start = 0;
  std::uint64_t window = 0;
  std::vector<const DeviceInstance*> chiplets(slots);
  while (start + slots <= remaining.size()) {
    if (opt.max_mcms && result.mcms.size() >= opt.max_mcms) break;
    for (std::size_t s = 0; s < slots; ++s) chiplets[s] = &bin.entries[remaining[start + s]].device;
    const std::uint64_t attempt_seed = derive_key(opt.seed, {stream::kShuffle, window++});
    AttemptResult attempt = attempt_mcm(chiplets, layout, opt.max_reconfig, attempt_seed, plan);
    if (!attempt.success()) {
      ++result.failed_windows;
      ++start;
      continue;
    }
    DeviceInstance mcm = std::move(*attempt.mcm);
    mcm.trial_index = result.mcms.size();
    mcm.seed_lineage = {opt.seed, {stream::kAssembly, result.mcms.size()}};
    std::vector<std::size_t> used(slots);
    for (std::size_t s = 0; s < slots; ++s) used[s] = remaining[start + attempt.placement[s]];
    result.mcms.push_back(std::move(mcm));
    result.bin_indices.push_back(std::move(used));
    ++result.reconfig_histogram[attempt.attempts];
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(start),
                    remaining.begin() + static_cast<std::ptrdiff_t>(start + slots));
  }
  result.chiplets_used = result.mcms.size() * slots;
  result.leftovers = bin.size() - result.chiplets_used;
  result.post_assembly_yield = result.fabricated_batch
                                   ? static_cast<double>(result.chiplets_used) /
                                         static_cast<double>(result.fabricated_batch) * result.bond_yield_factor
                                   : 0.0;
  return result;
}

inline AssemblyResult assemble_batch(const ChipletBin& bin, const McmSpec& spec, const FrequencyPlan& plan,
                                     const AssemblyOptions& opt = {}) {
  return assemble_batch(bin, McmLayout::of(spec), plan, opt);
}

/// The MCM configurations evaluated against monolithic devices: for each
/// chiplet size, every chiplet count n >= 2 with n * size <= cap, laid out as
/// the most square k x m (k <= m).
inline std::vector<McmSpec> enumerate_mcm_configs(int qubit_cap = kDefaultQubitCap,
                                                  const std::vector<int>& chiplet_sizes = {
                                                      kSupportedChipletSizes.begin(), kSupportedChipletSizes.end()}) {
  std::vector<McmSpec> out;
  for (int c : chiplet_sizes) {
    const ChipletSpec chip = ChipletSpec::of(c);
    for (int n = 2; n * c <= qubit_cap; ++n) {
      int k = static_cast<int>(std::sqrt(static_cast<double>(n)));
      while (n % k != 0) --k;
      out.push_back(McmSpec{chip, k, n / k});
    }
  }
  return out;
}

}  // namespace chiplet
