// Acceptance gate: runs every criterion at its stated tolerance and prints
// one PASS/FAIL line each. Exit status is non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "chiplet/chiplet.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace chiplet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << x;
  return s.str();
}

const unsigned kWorkers = resolve_workers(0);

// 1. Yield at step 0.06 GHz is at least the yield at 0.04, 0.05 and 0.07.
Outcome detuning_optimum() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = detuning_sweep({20, 50, 100}, {0.04, 0.05, 0.06, 0.07}, {0.014, 0.006}, 10000, 1, kWorkers);
  std::map<std::pair<int, double>, std::map<double, double>> by_point;
  for (const auto& r : rows) by_point[{r.size, r.sigma}][r.step] = r.estimate.yield;
  Outcome o{true, ""};
  for (const auto& [point, ys] : by_point) {
    const double best = ys.at(0.06);
    for (const auto& [step, y] : ys) {
      if (y > best) {
        o.pass = false;
        o.detail += " size " + std::to_string(point.first) + " sigma " + fmt(point.second) + " step " + fmt(step) +
                    " beats 0.06 (" + fmt(y) + " > " + fmt(best) + ");";
      }
    }
  }
  const double secs = seconds_since(t0);
  if (secs >= 120) o.pass = false;
  o.detail = "6 points, runtime " + fmt(secs, 3) + " s;" + o.detail;
  return o;
}

// 2. Absolute yields for 10 and 100 qubits.
Outcome absolute_yields() {
  const FrequencyPlan plan = FrequencyPlan::with_step(0.06, 0.014);
  const double y10 = estimate_yield(build_chiplet(ChipletSpec::of(10)), plan, 1000, 1, kWorkers).yield;
  const McmSpec layout = monolithic_layout_for(100);
  const double y100 = estimate_yield(build_monolithic(layout), plan, 1000, 1, kWorkers).yield;
  const bool ok = y10 >= 0.80 && y10 <= 0.90 && y100 >= 0.05 && y100 <= 0.17 && layout.dims() == "2x5";
  return {ok, "10q " + fmt(y10) + " in [0.80, 0.90], 100q (" + layout.dims() + " of " +
                  std::to_string(layout.chiplet.size) + "q) " + fmt(y100) + " in [0.05, 0.17]"};
}

// 3. 20-qubit chiplet yield at batch 1e5.
Outcome chiplet_yield_20() {
  const auto t0 = std::chrono::steady_clock::now();
  const YieldEstimate y =
      estimate_yield(build_chiplet(ChipletSpec::of(20)), FrequencyPlan::with_step(0.06, 0.014), 100000, 1, kWorkers);
  const double secs = seconds_since(t0);
  return {y.yield >= 0.66 && y.yield <= 0.73 && secs < 300,
          "yield " + fmt(y.yield) + " in [0.66, 0.73], runtime " + fmt(secs, 3) + " s"};
}

// 4. Raw fabrication spread collapses the 20-qubit yield.
Outcome raw_fabrication_collapse() {
  const double y =
      estimate_yield(build_chiplet(ChipletSpec::of(20)), FrequencyPlan::with_step(0.06, 0.1323), 10000, 1, kWorkers)
          .yield;
  return {y < 0.05, "yield " + fmt(y) + " < 0.05"};
}

// 5. Output bound worked example.
Outcome output_bound() {
  const std::int64_t n = mcm_output_upper_bound(0.85, 1000, 100, 10, 2, 5);
  const double gain = static_cast<double>(n) / 110.0;
  return {n == 850 && gain >= 7.0 && gain <= 8.5, "bound " + std::to_string(n) + ", gain " + fmt(gain) + "x"};
}

// 6. Bond model exactness against a long double reference.
Outcome bond_model() {
  const double s = 0.99999960642;
  const double f1 = bond_yield_factor(1, s, 25);
  long double ref = 1.0L;
  for (int i = 0; i < 25; ++i) ref *= static_cast<long double>(s);
  const double ulp = std::nextafter(static_cast<double>(ref), 2.0) - static_cast<double>(ref);
  const bool ok = f1 == std::pow(s, 25) && std::abs(f1 - static_cast<double>(ref)) <= ulp && bond_yield_factor(0, s, 25) == 1.0;
  std::ostringstream d;
  d.precision(17);
  d << "L=1 " << f1 << " (reference " << static_cast<double>(ref) << "), L=0 " << bond_yield_factor(0, s, 25);
  return {ok, d.str()};
}

// 7. Post-assembly MCM yield beats monolithic for every total, also with x100 bump failures.
Outcome mcm_yield_dominance() {
  const DetuningBins bins = synth_calibration(0.012, 0.018, 2000, 1);
  const FrequencyPlan plan = FrequencyPlan::with_step(0.06, 0.014);
  PopulationOptions opt;
  opt.batch = 2000;
  opt.seed = 1;
  opt.workers = kWorkers;
  opt.cap_to_monolithic = false;
  const double scaled = scaled_bump_success(kDefaultBumpSuccess, 100.0);
  Outcome o{true, ""};
  double worst = std::numeric_limits<double>::infinity();
  for (int total : {120, 240, 360}) {
    for (int chip : {20, 40, 60}) {
      const int n = total / chip;
      int k = static_cast<int>(std::sqrt(static_cast<double>(n)));
      while (n % k) --k;
      const McmSpec spec{ChipletSpec::of(chip), k, n / k};
      const PairedPopulation pop = build_population(spec, plan, bins, opt);
      const AssemblyResult& a = pop.assembly;
      const double y = a.post_assembly_yield;
      const double y_scaled = static_cast<double>(a.chiplets_used) / static_cast<double>(a.fabricated_batch) *
                              bond_yield_factor(static_cast<std::int64_t>(a.link_qubits_per_mcm), scaled);
      const double mono = pop.mono_yield.yield;
      if (!(y > mono && y_scaled > mono)) {
        o.pass = false;
        o.detail += " " + std::to_string(total) + "q from " + std::to_string(chip) + "q: MCM " + fmt(y) + " / " +
                    fmt(y_scaled) + " vs mono " + fmt(mono) + ";";
      }
      worst = std::min(worst, std::min(y, y_scaled) - mono);
    }
  }
  o.detail = "9 configs, smallest margin " + fmt(worst) + ";" + o.detail;
  return o;
}

// 8. Heatmap properties under the synthetic calibration.
Outcome heatmap_properties() {
  const DetuningBins bins = synth_calibration(0.012, 0.018, 2000, 1);
  const FrequencyPlan plan = FrequencyPlan::with_step(0.06, 0.014);
  PopulationOptions opt;
  opt.batch = 2000;
  opt.seed = 1;
  opt.workers = kWorkers;
  const std::vector<double> ratios = {4.17, 3.0, 2.0, 1.0};
  std::vector<PairedPopulation> pops;
  for (const McmSpec& s : square_configs({10, 20, 40, 60, 90, 120}, {2, 3, 4, 5, 6, 7})) {
    pops.push_back(build_population(s, plan, bins, opt));
  }
  Outcome o{true, ""};
  int feasible = 0;
  double max_r1 = 0, max_r2 = 0, min_10q = std::numeric_limits<double>::infinity();
  for (const auto& pop : pops) {
    std::vector<HeatmapCell> cells;
    for (double r : ratios) cells.push_back(heatmap_cell(pop, bins, r));
    if (!cells[0].feasible) continue;
    ++feasible;
    const std::string name = std::to_string(pop.spec.chiplet.size) + "q " + pop.spec.dims();
    max_r1 = std::max(max_r1, cells[3].value);
    max_r2 = std::max(max_r2, cells[2].value);
    if (cells[3].value > 1.01) o.pass = false, o.detail += " (a) " + name + " r=1 " + fmt(cells[3].value) + ";";
    if (!(cells[2].value < 1.0)) o.pass = false, o.detail += " (b) " + name + " r=2 " + fmt(cells[2].value) + ";";
    for (std::size_t i = 1; i < cells.size(); ++i) {
      if (cells[i].value > cells[i - 1].value) {
        o.pass = false;
        o.detail += " (c) " + name + " rises at r=" + fmt(ratios[i]) + ";";
      }
    }
    if (pop.spec.chiplet.size == 10) {
      min_10q = std::min(min_10q, cells[0].value);
      if (!(cells[0].value > 1.0)) o.pass = false, o.detail += " (d) " + name + " r=4.17 " + fmt(cells[0].value) + ";";
    }
  }
  if (feasible == 0) o.pass = false;
  o.detail = std::to_string(feasible) + "/" + std::to_string(pops.size()) + " cells feasible, max r=1 " + fmt(max_r1) +
             ", max r=2 " + fmt(max_r2) + ", min 10q r=4.17 " + fmt(min_10q) + ";" + o.detail;
  return o;
}

// 9. Pre-routing two-qubit gate counts.
Outcome structural_counts() {
  const std::size_t ghz = generate_circuit(BenchFamily::GHZ, 32, 1).two_qubit_count();
  const std::size_t tfim = generate_circuit(BenchFamily::TFIM, 64, 1).two_qubit_count();
  const std::size_t bc32 = generate_circuit(BenchFamily::BitCode, 32, 1).two_qubit_count();
  const std::size_t bc64 = generate_circuit(BenchFamily::BitCode, 64, 1).two_qubit_count();
  return {ghz == 31 && tfim == 126 && bc32 == 30 && bc64 == 62,
          "GHZ(32) " + std::to_string(ghz) + ", TFIM(64) " + std::to_string(tfim) + ", BitCode(32) " +
              std::to_string(bc32) + ", BitCode(64) " + std::to_string(bc64)};
}

// 10. Square MCMs with E_MCM/E_mono < 1 also win on GHZ and TFIM fidelity.
Outcome application_trend() {
  const FrequencyPlan plan = FrequencyPlan::with_step(0.06, 0.014);
  Outcome o{true, ""};
  int checked = 0, cells_below_one = 0, infeasible = 0;
  double smallest = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const DetuningBins bins = synth_calibration(0.012, 0.018, 2000, seed);
    PopulationOptions opt;
    opt.batch = 10000;
    opt.seed = seed;
    opt.workers = kWorkers;
    for (const McmSpec& s : square_configs({40, 60, 90}, {2, 3, 4, 5, 6, 7})) {
      const PairedPopulation pop = build_population(s, plan, bins, opt);
      const HeatmapCell cell = heatmap_cell(pop, bins, 4.17);
      if (!cell.feasible) {
        ++infeasible;
        continue;
      }
      if (!(cell.value < 1.0)) continue;
      ++cells_below_one;
      for (BenchFamily f : {BenchFamily::GHZ, BenchFamily::TFIM}) {
        const BenchComparison r = compare_architectures(f, pop, bins, 4.17, derive_key(seed, {stream::kCircuit}));
        ++checked;
        smallest = std::min(smallest, r.ratio);
        if (!(r.ratio > 1.0)) {
          o.pass = false;
          o.detail += " seed " + std::to_string(seed) + " " + std::to_string(s.chiplet.size) + "q " + s.dims() + " " +
                      to_string(f) + " " + fmt(r.ratio) + ";";
        }
      }
    }
  }
  if (checked == 0) o.pass = false;
  o.detail = "5 seeds, " + std::to_string(cells_below_one) + " cells with E ratio < 1, " + std::to_string(checked) +
             " benchmark ratios checked (smallest " + fmt(smallest) + "), " + std::to_string(infeasible) +
             " infeasible cells;" + o.detail;
  return o;
}

// 11. Every subcommand is byte-identical with 1 and 8 workers.
Outcome determinism() {
  const fs::path root = support::scratch_dir("acceptance-determinism");
  auto config = [&](const std::string& sub, unsigned workers) {
    ExperimentConfig c;
    c.subcommand = sub;
    c.seed = 2024;
    c.workers = workers;
    c.batch = 400;
    c.mono_batch = 400;
    c.out_dir = (root / (sub + "-w" + std::to_string(workers))).string();
    if (sub == "sweep") c.sizes = {10, 20, 50, 100};
    if (sub == "configs") c.chiplets = {10, 20};
    if (sub == "assemble") c.chiplets = {20, 40};
    if (sub == "heatmap") c.chiplets = {10, 20, 40}, c.square_dims = {2, 3};
    if (sub == "bench") c.chiplets = {10, 20}, c.square_dims = {2};
    if (sub == "ingest-calib") c.input = (root / "synth-calib-w1" / "calibration.json").string();
    return c;
  };
  Outcome o{true, ""};
  for (const std::string& sub : {std::string("synth-calib"), std::string("ingest-calib"), std::string("sweep"),
                                 std::string("configs"), std::string("assemble"), std::string("heatmap"),
                                 std::string("bench")}) {
    std::ostringstream err;
    const ExperimentConfig a = config(sub, 1), b = config(sub, 8);
    const int ra = run_experiment(a, err), rb = run_experiment(b, err);
    if (ra != kExitOk || rb != kExitOk) {
      o.pass = false;
      o.detail += " " + sub + " exited " + std::to_string(ra) + "/" + std::to_string(rb) + " " + err.str() + ";";
      continue;
    }
    const auto ta = support::read_tree(a.out_dir), tb = support::read_tree(b.out_dir);
    if (ta != tb) {
      o.pass = false;
      o.detail += " " + sub + " differs;";
    } else {
      o.detail += " " + sub + " " + std::to_string(ta.size()) + " files;";
    }
  }
  fs::remove_all(root);
  o.detail = "workers 1 vs 8:" + o.detail;
  return o;
}

// 12. Collision checker against the brute-force oracle on the full grid.
Outcome oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = oracle::exhaustive_three_qubit(4.8, 5.3, 0.005);
  const double secs = seconds_since(t0);
  return {r.mismatches == 0 && r.configurations == 2ull * 101 * 101 * 101 && secs < 60,
          std::to_string(r.configurations) + " configurations, " + std::to_string(r.mismatches) + " mismatches, " +
              fmt(secs, 3) + " s" + (r.mismatches ? " first: " + r.first_mismatch : std::string())};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"detuning optimum at 0.06 GHz", detuning_optimum},
      {"absolute 10q / 100q yields", absolute_yields},
      {"20-qubit chiplet yield", chiplet_yield_20},
      {"raw-fabrication collapse", raw_fabrication_collapse},
      {"output upper bound and gain", output_bound},
      {"bond model exactness", bond_model},
      {"MCM post-assembly yield dominance", mcm_yield_dominance},
      {"heatmap properties", heatmap_properties},
      {"benchmark structural counts", structural_counts},
      {"application trend (GHZ, TFIM)", application_trend},
      {"determinism across worker counts", determinism},
      {"collision oracle equivalence", oracle_equivalence},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("[%s] %2zu %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
