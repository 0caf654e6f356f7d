#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "chiplet/hexlattice.hpp"
#include "chiplet/rng.hpp"

namespace chiplet {

/// A fabricated device: a shared, immutable topology plus per-qubit
/// frequencies and (after noise assignment) per-edge two-qubit infidelities.
struct DeviceInstance {
  std::shared_ptr<const Topology> topology;
  std::vector<double> freq;             // GHz, indexed by qubit id
  std::vector<double> edge_infidelity;  // indexed by edge id; empty until assigned
  std::uint64_t trial_index = 0;
  SeedLineage seed_lineage;

  bool has_noise() const noexcept { return topology && edge_infidelity.size() == topology->edge_count(); }
};

}  // namespace chiplet
