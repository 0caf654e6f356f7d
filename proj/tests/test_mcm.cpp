#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <set>
#include <vector>

#include "chiplet/analysis.hpp"
#include "chiplet/mcm.hpp"

using namespace chiplet;

namespace {

std::vector<DeviceInstance> good_chiplets(int size, double sigma, std::size_t want, std::uint64_t seed) {
  const auto t = std::make_shared<const Topology>(build_chiplet(ChipletSpec::of(size)));
  FrequencyPlan plan;
  plan.sigma = sigma;
  std::vector<DeviceInstance> out;
  for (std::uint64_t trial = 0; out.size() < want; ++trial) {
    DeviceInstance d = sample_frequencies(t, plan, seed, trial);
    if (check_device(d, plan.alpha, plan.thresholds).collision_free()) out.push_back(std::move(d));
  }
  return out;
}

bool fully_collision_free(const DeviceInstance& d) {
  const FrequencyPlan plan;
  return check_device(d, plan.alpha, plan.thresholds).collision_free();
}

}  // namespace

TEST(Bond, FactorIsExact) {
  const double s = kDefaultBumpSuccess;
  EXPECT_EQ(bond_yield_factor(0), 1.0);
  EXPECT_EQ(bond_yield_factor(1), std::pow(s, 25));
  EXPECT_EQ(bond_yield_factor(4), std::pow(std::pow(s, 25), 4.0));
  EXPECT_EQ(bond_yield_factor(3, 0.5, 2), std::pow(0.25, 3.0));
  EXPECT_THROW(bond_yield_factor(-1), std::invalid_argument);
  EXPECT_THROW(bond_yield_factor(1, 1.5), std::invalid_argument);
}

TEST(Bond, SensitivityScaling) {
  EXPECT_NEAR(1.0 - scaled_bump_success(kDefaultBumpSuccess, 100.0), 100.0 * (1.0 - kDefaultBumpSuccess), 1e-15);
  EXPECT_EQ(scaled_bump_success(0.9, 1.0), 0.9);
  EXPECT_EQ(scaled_bump_success(0.5, 10.0), 0.0);
}

TEST(Ranking, SortsByOnChipAverageThenTrial) {
  const DetuningBins bins = synth_calibration(0.012, 0.018, 1000, 1);
  std::vector<DeviceInstance> devs;
  for (auto& d : good_chiplets(20, 0.014, 30, 3)) devs.push_back(assign_device_noise(d, bins, {}, d.trial_index));
  devs.push_back(devs.front());
  devs.back().trial_index = 1000;  // duplicate E_avg, later trial
  const ChipletBin bin = rank_chiplets(devs);
  ASSERT_EQ(bin.size(), devs.size());
  for (std::size_t i = 1; i < bin.size(); ++i) {
    const auto& a = bin.entries[i - 1];
    const auto& b = bin.entries[i];
    ASSERT_TRUE(a.e_avg < b.e_avg || (a.e_avg == b.e_avg && a.device.trial_index < b.device.trial_index));
    EXPECT_EQ(b.e_avg, avg_on_chip_infidelity(b.device));
  }
  std::vector<DeviceInstance> mixed = {devs[0]};
  auto other = good_chiplets(10, 0.014, 1, 1);
  mixed.push_back(assign_device_noise(other[0], bins, {}, 1));
  EXPECT_THROW(rank_chiplets(mixed), std::invalid_argument);
}

TEST(Layout, LinkSitesMatchAnIndependentCount) {
  for (const McmSpec spec : {McmSpec{ChipletSpec::of(10), 1, 2}, McmSpec{ChipletSpec::of(20), 2, 2},
                             McmSpec{ChipletSpec::of(40), 2, 3}}) {
    const McmLayout l = McmLayout::of(spec);
    const Topology& t = *l.topology;
    EXPECT_EQ(l.link_pairs.size(), t.link_edges().size());
    // Unordered neighbor pairs at a control where at least one edge is a link.
    std::size_t expected = 0;
    for (QubitId c = 0; c < t.qubit_count(); ++c) {
      bool control = false;
      for (const Edge& e : t.edges()) control = control || e.control == c;
      if (!control) continue;
      const auto& nb = t.neighbors(c);
      for (std::size_t x = 0; x < nb.size(); ++x) {
        for (std::size_t y = x + 1; y < nb.size(); ++y) {
          expected += t.edge(*t.find_edge(c, nb[x])).is_link || t.edge(*t.find_edge(c, nb[y])).is_link;
        }
      }
    }
    EXPECT_EQ(l.link_spectators.size(), expected);
    EXPECT_EQ(l.link_qubit_count, 2 * t.link_edges().size());
    EXPECT_EQ(l.chiplet_qubits, static_cast<std::size_t>(spec.chiplet.size));
  }
}

TEST(Attempt, AdversarialPairNeedsTheSwappedPlacement) {
  const McmSpec spec{ChipletSpec::of(10), 1, 2};
  const McmLayout layout = McmLayout::of(spec);
  const auto chip = std::make_shared<const Topology>(build_chiplet(spec.chiplet));
  FrequencyPlan plan;
  plan.sigma = 0.0;
  DeviceInstance x = sample_frequencies(chip, plan, 1, 0);
  const DeviceInstance y = sample_frequencies(chip, plan, 1, 1);
  for (const LinkStub& s : chip->stubs()) {
    // Type 2 against the F0 qubit it links to when x sits on the left.
    if (s.side == StubSide::Right && s.index == 0) x.freq[s.qubit] = 5.165;
  }
  ASSERT_TRUE(fully_collision_free(x));
  ASSERT_TRUE(fully_collision_free(y));

  const std::vector<const DeviceInstance*> chiplets = {&x, &y};
  // Exhaustive oracle: which placements give a collision-free MCM?
  std::set<std::vector<std::size_t>> good;
  std::vector<std::size_t> p = {0, 1};
  do {
    if (fully_collision_free(build_mcm_device(layout, chiplets, p))) good.insert(p);
  } while (std::next_permutation(p.begin(), p.end()));
  ASSERT_EQ(good, (std::set<std::vector<std::size_t>>{{1, 0}}));

  EXPECT_FALSE(attempt_mcm(chiplets, layout, 1, 5, plan).success());
  const AttemptResult r = attempt_mcm(chiplets, layout, 100, 5, plan);
  ASSERT_TRUE(r.success());
  EXPECT_GE(r.attempts, 1);
  EXPECT_EQ(r.placement, (std::vector<std::size_t>{1, 0}));
  EXPECT_TRUE(fully_collision_free(*r.mcm));
}

TEST(Attempt, LinkOnlyCheckEqualsFullCheckForGoodChiplets) {
  const McmSpec spec{ChipletSpec::of(10), 2, 2};
  const McmLayout layout = McmLayout::of(spec);
  const FrequencyPlan plan;
  const auto pool = good_chiplets(10, 0.03, 40, 21);
  int successes = 0, failures = 0;
  for (std::size_t g = 0; g + 4 <= pool.size(); g += 4) {
    std::vector<std::size_t> order = {0, 1, 2, 3};
    do {
      std::vector<const DeviceInstance*> c(4);
      for (int s = 0; s < 4; ++s) c[s] = &pool[g + order[s]];
      const std::vector<std::size_t> identity = {0, 1, 2, 3};
      const bool full = fully_collision_free(build_mcm_device(layout, c, identity));
      const bool fast = attempt_mcm(c, layout, 1, 0, plan).success();
      ASSERT_EQ(fast, full);
      (fast ? successes : failures)++;
    } while (std::next_permutation(order.begin(), order.end()));
  }
  EXPECT_GT(successes, 0);
  EXPECT_GT(failures, 0);
}

TEST(Attempt, BuildsDeviceWithNaNLinksUntilAssigned) {
  const McmSpec spec{ChipletSpec::of(10), 1, 2};
  const McmLayout layout = McmLayout::of(spec);
  const DetuningBins bins = synth_calibration(0.012, 0.018, 200, 1);
  auto pool = good_chiplets(10, 0.014, 2, 4);
  for (auto& d : pool) d = assign_device_noise(d, bins, {}, 3);
  const std::vector<const DeviceInstance*> c = {&pool[0], &pool[1]};
  const std::vector<std::size_t> p = {0, 1};
  DeviceInstance m = build_mcm_device(layout, c, p);
  for (std::size_t e = 0; e < m.edge_infidelity.size(); ++e) {
    EXPECT_EQ(std::isnan(m.edge_infidelity[e]), layout.topology->edge(e).is_link);
  }
  for (QubitId q = 0; q < 10; ++q) {
    EXPECT_EQ(m.freq[q], pool[0].freq[q]);
    EXPECT_EQ(m.freq[10 + q], pool[1].freq[q]);
  }
  assign_link_noise(m, bins, {4.17}, 8);
  EXPECT_TRUE(std::all_of(m.edge_infidelity.begin(), m.edge_infidelity.end(), [](double v) { return v >= 0 && v <= 1; }));
  const std::vector<const DeviceInstance*> one = {&pool[0]};
  EXPECT_THROW(attempt_mcm(one, layout, 10, 0, FrequencyPlan{}), std::invalid_argument);
  EXPECT_THROW(attempt_mcm(c, layout, 0, 0, FrequencyPlan{}), std::invalid_argument);
}

TEST(Assembly, BatchInvariants) {
  const McmSpec spec{ChipletSpec::of(20), 2, 2};
  const DetuningBins bins = synth_calibration(0.012, 0.018, 1000, 1);
  std::vector<DeviceInstance> devs;
  for (auto& d : good_chiplets(20, 0.014, 203, 6)) devs.push_back(assign_device_noise(d, bins, {}, d.trial_index));
  const ChipletBin bin = rank_chiplets(devs);
  AssemblyOptions opt;
  opt.seed = 12;
  opt.fabricated_batch = 300;
  const AssemblyResult r = assemble_batch(bin, spec, FrequencyPlan{}, opt);

  EXPECT_EQ(r.chiplets_used + r.leftovers, bin.size());
  EXPECT_EQ(r.chiplets_used, 4 * r.mcms.size());
  EXPECT_LT(r.leftovers, bin.size());
  std::set<std::size_t> used;
  for (const auto& idx : r.bin_indices) {
    for (std::size_t i : idx) EXPECT_TRUE(used.insert(i).second);
  }
  std::size_t hist = 0;
  for (const auto& [k, n] : r.reconfig_histogram) {
    EXPECT_GE(k, 0);
    EXPECT_LT(k, opt.max_reconfig);
    hist += n;
  }
  EXPECT_EQ(hist, r.mcms.size());
  for (std::size_t i = 0; i < r.mcms.size(); ++i) {
    EXPECT_TRUE(fully_collision_free(r.mcms[i]));
    EXPECT_EQ(r.mcms[i].trial_index, i);
    for (std::size_t slot = 0; slot < 4; ++slot) {
      const auto& src = bin.entries[r.bin_indices[i][slot]].device;
      EXPECT_TRUE(std::equal(src.freq.begin(), src.freq.end(), r.mcms[i].freq.begin() + static_cast<std::ptrdiff_t>(slot * 20)));
    }
  }
  EXPECT_EQ(r.link_qubits_per_mcm, McmLayout::of(spec).link_qubit_count);
  EXPECT_DOUBLE_EQ(r.bond_yield_factor, bond_yield_factor(static_cast<std::int64_t>(r.link_qubits_per_mcm)));
  EXPECT_DOUBLE_EQ(r.post_assembly_yield, static_cast<double>(r.chiplets_used) / 300.0 * r.bond_yield_factor);

  // Deterministic, and max_mcms is honored.
  const AssemblyResult again = assemble_batch(bin, spec, FrequencyPlan{}, opt);
  EXPECT_EQ(again.bin_indices, r.bin_indices);
  opt.max_mcms = 3;
  EXPECT_EQ(assemble_batch(bin, spec, FrequencyPlan{}, opt).mcms.size(), std::min<std::size_t>(3, r.mcms.size()));
}

TEST(Assembly, BestFirstOrderIsPreserved) {
  // With ideal frequencies every placement works, so MCM i takes bin
  // entries 4i..4i+3 in order.
  const McmSpec spec{ChipletSpec::of(10), 2, 2};
  const DetuningBins bins = synth_calibration(0.012, 0.018, 1000, 1);
  FrequencyPlan plan;
  plan.sigma = 0.0;
  const auto t = std::make_shared<const Topology>(build_chiplet(spec.chiplet));
  std::vector<DeviceInstance> devs;
  for (std::uint64_t i = 0; i < 10; ++i) devs.push_back(assign_device_noise(sample_frequencies(t, plan, 1, i), bins, {}, i));
  const AssemblyResult r = assemble_batch(rank_chiplets(devs), spec, plan);
  ASSERT_EQ(r.mcms.size(), 2u);
  EXPECT_EQ(r.bin_indices[0], (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(r.bin_indices[1], (std::vector<std::size_t>{4, 5, 6, 7}));
  EXPECT_EQ(r.leftovers, 2u);
  EXPECT_EQ(r.reconfig_histogram.at(0), 2u);
  EXPECT_EQ(r.failed_windows, 0u);
}

TEST(Configs, EnumerationWithinCap) {
  const auto all = enumerate_mcm_configs(500);
  EXPECT_EQ(all.size(), 102u);
  for (const auto& s : all) {
    EXPECT_LE(s.qubit_count(), 500);
    EXPECT_LE(s.rows, s.cols);
    EXPECT_GE(s.chiplet_count(), 2);
  }
  EXPECT_NE(mcm_seed(1, 0), mcm_seed(1, 1));
  EXPECT_NE(mcm_seed(1, 0), mcm_seed(2, 0));
}

TEST(Population, PairedBatchesAndCap) {
  const DetuningBins bins = synth_calibration(0.012, 0.018, 1000, 1);
  PopulationOptions opt;
  opt.batch = 400;
  opt.seed = 3;
  const McmSpec spec{ChipletSpec::of(20), 2, 2};
  const PairedPopulation capped = build_population(spec, FrequencyPlan{}, bins, opt);
  EXPECT_EQ(capped.mono_yield.batch, 400u);
  EXPECT_EQ(capped.chiplet_yield.batch, 1600u);
  EXPECT_EQ(capped.mono.size(), capped.mono_yield.collision_free);
  EXPECT_LE(capped.assembly.mcms.size(), capped.mono.size());
  for (const auto& d : capped.mono) EXPECT_TRUE(d.has_noise());

  opt.cap_to_monolithic = false;
  const PairedPopulation open = build_population(spec, FrequencyPlan{}, bins, opt);
  EXPECT_GE(open.assembly.mcms.size(), capped.assembly.mcms.size());
  // The capped MCMs are the first (best-ranked) of the uncapped ones.
  for (std::size_t i = 0; i < capped.assembly.mcms.size(); ++i) {
    EXPECT_EQ(capped.assembly.mcms[i].freq, open.assembly.mcms[i].freq);
  }

  opt.workers = 4;
  const PairedPopulation threaded = build_population(spec, FrequencyPlan{}, bins, opt);
  ASSERT_EQ(threaded.assembly.mcms.size(), open.assembly.mcms.size());
  for (std::size_t i = 0; i < open.assembly.mcms.size(); ++i) {
    EXPECT_EQ(threaded.assembly.mcms[i].freq, open.assembly.mcms[i].freq);
    EXPECT_EQ(threaded.assembly.mcms[i].edge_infidelity.size(), open.assembly.mcms[i].edge_infidelity.size());
  }
}

TEST(Heatmap, CellIsMonotoneInLinkRatio) {
  const DetuningBins bins = synth_calibration(0.012, 0.018, 2000, 1);
  PopulationOptions opt;
  opt.batch = 300;
  opt.seed = 5;
  const PairedPopulation pop = build_population({ChipletSpec::of(20), 2, 2}, FrequencyPlan{}, bins, opt);
  ASSERT_TRUE(pop.feasible());
  double prev = std::numeric_limits<double>::infinity();
  for (double r : {4.17, 3.0, 2.0, 1.0}) {
    const HeatmapCell c = heatmap_cell(pop, bins, r);
    ASSERT_TRUE(c.feasible);
    EXPECT_LE(c.value, prev);
    EXPECT_DOUBLE_EQ(c.value, c.e_mcm / c.e_mono);
    prev = c.value;
  }
  EXPECT_EQ(square_configs({10, 60}, {2, 3}).size(), 3u);  // 3x3 of 60 is over the cap
}
