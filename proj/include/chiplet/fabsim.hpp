#pragma once

/**
 * @file fabsim.hpp
 * @brief Fabrication-variation sampling and Monte Carlo collision-free yield.
 *
 * Frequencies are ideal(class) + sigma * z where z is a standard normal drawn
 * from a counter-based generator keyed by (master seed, trial, qubit). The
 * same z is reused for every frequency plan, so sweeps over step size and
 * sigma compare devices under common random numbers.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "chiplet/collision.hpp"
#include "chiplet/device.hpp"
#include "chiplet/hexlattice.hpp"
#include "chiplet/parallel.hpp"
#include "chiplet/rng.hpp"

namespace chiplet {

struct FrequencyPlan {
  double f0 = 5.00;
  double f1 = 5.06;
  double f2 = 5.12;
  double sigma = 0.014;
  double alpha = -0.330;
  CollisionThresholds thresholds;

  /// Equally spaced targets F1 = F0 + step, F2 = F0 + 2 step.
  static FrequencyPlan with_step(double step, double sigma, double f0 = 5.0, double alpha = -0.330) {
    FrequencyPlan p;
    p.f0 = f0;
    p.f1 = f0 + step;
    p.f2 = f0 + 2.0 * step;
    p.sigma = sigma;
    p.alpha = alpha;
    return p;
  }

  double ideal(FrequencyClass c) const noexcept {
    switch (c) {
      case FrequencyClass::F0: return f0;
      case FrequencyClass::F1: return f1;
      case FrequencyClass::F2: return f2;
    }
    return f0;
  }

  void validate() const {
    if (!(f0 < f1 && f1 < f2)) throw std::invalid_argument("frequency plan requires F0 < F1 < F2");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma_f must be >= 0");
    if (!(alpha < 0.0)) throw std::invalid_argument("anharmonicity must be negative");
    thresholds.validate();
  }
};

struct YieldEstimate {
  int size = 0;
  double yield = 0.0;
  std::uint64_t batch = 0;
  std::uint64_t collision_free = 0;
  double ci95 = 0.0;  // normal-approximation binomial half-width
};

inline YieldEstimate make_yield_estimate(int size, std::uint64_t good, std::uint64_t batch) {
  YieldEstimate y;
  y.size = size;
  y.batch = batch;
  y.collision_free = good;
  y.yield = batch ? static_cast<double>(good) / static_cast<double>(batch) : 0.0;
  y.ci95 = batch ? 1.96 * std::sqrt(y.yield * (1.0 - y.yield) / static_cast<double>(batch)) : 0.0;
  return y;
}

/// Standard normal deviate for (seed, trial, qubit).
inline double fabrication_deviate(std::uint64_t master_seed, std::uint64_t trial, QubitId q) noexcept {
  CounterRng rng(master_seed, {stream::kFrequency, trial, q});
  return rng.normal();
}

/// Writes sampled frequencies for one trial into `out` (size = qubit count).
inline void sample_frequencies_into(std::span<double> out, const Topology& t, const FrequencyPlan& plan,
                                    std::uint64_t master_seed, std::uint64_t trial) noexcept {
  for (QubitId q = 0; q < t.qubit_count(); ++q) {
    const double ideal = plan.ideal(t.class_of(q));
    out[q] = plan.sigma == 0.0 ? ideal : ideal + plan.sigma * fabrication_deviate(master_seed, trial, q);
  }
}

inline DeviceInstance sample_frequencies(std::shared_ptr<const Topology> t, const FrequencyPlan& plan,
                                         std::uint64_t master_seed, std::uint64_t trial) {
  if (!t) throw std::invalid_argument("sample_frequencies: null topology");
  if (!(plan.sigma >= 0.0)) throw std::invalid_argument("sigma_f must be >= 0");
  DeviceInstance d;
  d.topology = t;
  d.freq.resize(t->qubit_count());
  sample_frequencies_into(d.freq, *t, plan, master_seed, trial);
  d.trial_index = trial;
  d.seed_lineage = {master_seed, {stream::kFrequency, trial}};
  return d;
}

/// Per-trial collision-free flags for trials [0, batch).
inline std::vector<std::uint8_t> collision_free_flags(const Topology& t, const FrequencyPlan& plan,
                                                      std::uint64_t batch, std::uint64_t seed,
                                                      unsigned workers = 1) {
  plan.validate();
  const CollisionSites sites = CollisionSites::of(t);
  std::vector<std::uint8_t> flags(batch, 0);
  parallel_chunks(batch, workers, [&](std::size_t begin, std::size_t end) {
    std::vector<double> freq(t.qubit_count());
    for (std::size_t trial = begin; trial < end; ++trial) {
      sample_frequencies_into(freq, t, plan, seed, trial);
      flags[trial] = collision_free(sites, freq, plan.alpha, plan.thresholds) ? 1 : 0;
    }
  });
  return flags;
}

/// Fraction of `batch` sampled devices that are collision-free.
inline YieldEstimate estimate_yield(const Topology& t, const FrequencyPlan& plan, std::uint64_t batch,
                                    std::uint64_t seed, unsigned workers = 1) {
  if (batch < 1) throw std::invalid_argument("batch must be >= 1");
  const auto flags = collision_free_flags(t, plan, batch, seed, workers);
  std::uint64_t good = 0;
  for (auto f : flags) good += f;
  return make_yield_estimate(static_cast<int>(t.qubit_count()), good, batch);
}

struct SweepRow {
  int size = 0;
  double step = 0.0;
  double sigma = 0.0;
  McmSpec layout;
  YieldEstimate estimate;
};

/// Yield for every (size, step, sigma); monolithic layouts per monolithic_layout_for.
inline std::vector<SweepRow> detuning_sweep(const std::vector<int>& sizes, const std::vector<double>& steps,
                                            const std::vector<double>& sigmas, std::uint64_t batch,
                                            std::uint64_t seed, unsigned workers = 1, double f0 = 5.0,
                                            double alpha = -0.330,
                                            const CollisionThresholds& thresholds = {}) {
  if (steps.empty() || sigmas.empty()) throw std::invalid_argument("detuning sweep needs steps and sigmas");
  std::vector<SweepRow> rows;
  for (int size : sizes) {
    const McmSpec layout = monolithic_layout_for(size);
    const Topology t = build_monolithic(layout);
    for (double sigma : sigmas) {
      for (double step : steps) {
        FrequencyPlan plan = FrequencyPlan::with_step(step, sigma, f0, alpha);
        plan.thresholds = thresholds;
        rows.push_back({size, step, sigma, layout, estimate_yield(t, plan, batch, seed, workers)});
      }
    }
  }
  return rows;
}

/**
 * Upper bound on assembled MCMs from one wafer's worth of chiplets:
 * N = floor(Y_c * (B * q_m / q_c) / (k * m)).
 */
inline std::int64_t mcm_output_upper_bound(double chiplet_yield, std::int64_t batch, int q_mono, int q_chiplet,
                                           int k, int m) {
  if (q_chiplet == 0 || k * m == 0) throw std::invalid_argument("mcm_output_upper_bound: zero denominator");
  const long double chiplets = static_cast<long double>(batch) * q_mono / q_chiplet;
  const long double n = static_cast<long double>(chiplet_yield) * chiplets / (static_cast<long double>(k) * m);
  // Decimal yields like 0.85 are not exact in binary; absorb that before flooring.
  return static_cast<std::int64_t>(std::floor(n + 1e-9L));
}

using BigInt = boost::multiprecision::cpp_int;

struct ConfigCount {
  BigInt value;
  double log10 = 0.0;  // -inf when value is 0
};

/// Ordered placements of `slots` chiplets drawn from `available`: available! / (available - slots)!.
inline ConfigCount config_count(std::int64_t available, std::int64_t slots) {
  if (available < 0 || slots < 1) throw std::invalid_argument("config_count needs available >= 0 and slots >= 1");
  ConfigCount out;
  if (slots > available) {
    out.value = 0;
    out.log10 = -INFINITY;
    return out;
  }
  out.value = 1;
  double lg = 0.0;
  for (std::int64_t i = 0; i < slots; ++i) {
    out.value *= available - i;
    lg += std::log10(static_cast<double>(available - i));
  }
  out.log10 = lg;
  return out;
}

}  // namespace chiplet
