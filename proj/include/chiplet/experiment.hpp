#pragma once

/**
 * @file experiment.hpp
 * @brief Experiment configuration, subcommand drivers and report emission.
 *
 * Every subcommand writes into a staging directory next to the output
 * directory and moves the files over only when the run succeeds, so a failed
 * run leaves no partial results. The manifest records the seed and every
 * parameter that affects results (not the worker count, which does not), and
 * can be passed back as a config file to reproduce the run.
 */

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "chiplet/analysis.hpp"
#include "chiplet/bench.hpp"
#include "chiplet/fabsim.hpp"
#include "chiplet/hexlattice.hpp"
#include "chiplet/io.hpp"
#include "chiplet/mcm.hpp"
#include "chiplet/noise.hpp"

namespace chiplet {

inline constexpr const char* kToolName = "chiplet-yield";
inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr const char* kOutDirEnv = "CHIPLET_OUT_DIR";
inline constexpr const char* kDefaultOutDir = "chiplet-out";

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitRuntime = 2, kExitInfeasible = 3 };

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"sweep",   "configs", "assemble",    "heatmap",
                                                 "bench",   "ingest-calib", "synth-calib"};
  return names;
}

/// Invalid configuration; `field` names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// The experiment ran but has nothing comparable to report.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string subcommand;
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;  // 0: all hardware threads
  std::uint64_t batch = 1000;
  std::uint64_t mono_batch = 1000;  // configs: monolithic batch for the output bound
  std::string out_dir;              // empty: $CHIPLET_OUT_DIR, then ./chiplet-out

  double f0 = 5.0;
  double step = 0.06;
  double alpha = -0.330;
  CollisionThresholds thresholds;

  // Empty lists take per-subcommand defaults (see resolve_defaults).
  std::vector<double> sigmas;
  std::vector<double> steps;
  std::vector<int> sizes;
  std::vector<int> chiplets;
  std::vector<std::string> dims;
  std::vector<int> totals;
  std::vector<int> square_dims;
  std::vector<double> ratios;
  std::vector<std::string> families;
  double link_ratio = 4.17;

  int max_reconfig = kDefaultMaxReconfig;
  double bump_success = kDefaultBumpSuccess;
  int bumps_per_link_qubit = kDefaultBumpsPerLinkQubit;
  double bond_failure_scale = 100.0;
  int qubit_cap = kDefaultQubitCap;
  bool export_devices = true;

  std::string calibration;  // snapshot file; empty: synthetic
  double synth_median = 0.012;
  double synth_mean = 0.018;
  std::uint64_t synth_edges = 2000;
  double bin_width = 0.1;
  std::string input;  // ingest-calib source

  FrequencyPlan plan(double sigma, double step_ghz) const {
    FrequencyPlan p = FrequencyPlan::with_step(step_ghz, sigma, f0, alpha);
    p.thresholds = thresholds;
    return p;
  }
};

// ---------------------------------------------------------------------------
// Config <-> JSON

namespace detail {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out, const char* expected) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(key, std::string("expected ") + expected + ", got " + j.at(key).dump());
  }
}

}  // namespace detail

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["subcommand"] = c.subcommand;
  if (c.seed) j["seed"] = *c.seed;
  j["batch"] = c.batch;
  j["mono_batch"] = c.mono_batch;
  j["f0"] = c.f0;
  j["step"] = c.step;
  j["alpha"] = c.alpha;
  j["thresholds"] = {{"t1", c.thresholds.t1}, {"t2", c.thresholds.t2}, {"t3", c.thresholds.t3},
                     {"t5", c.thresholds.t5}, {"t6", c.thresholds.t6}, {"t7", c.thresholds.t7}};
  j["sigmas"] = c.sigmas;
  j["steps"] = c.steps;
  j["sizes"] = c.sizes;
  j["chiplets"] = c.chiplets;
  j["dims"] = c.dims;
  j["totals"] = c.totals;
  j["square_dims"] = c.square_dims;
  j["ratios"] = c.ratios;
  j["families"] = c.families;
  j["link_ratio"] = c.link_ratio;
  j["max_reconfig"] = c.max_reconfig;
  j["bump_success"] = c.bump_success;
  j["bumps_per_link_qubit"] = c.bumps_per_link_qubit;
  j["bond_failure_scale"] = c.bond_failure_scale;
  j["qubit_cap"] = c.qubit_cap;
  j["export_devices"] = c.export_devices;
  j["calibration"] = c.calibration;
  j["synth_median"] = c.synth_median;
  j["synth_mean"] = c.synth_mean;
  j["synth_edges"] = c.synth_edges;
  j["bin_width"] = c.bin_width;
  j["input"] = c.input;
  return j;
}

/// Reads a config object, or a manifest (its "config" member). Keys absent
/// from `j` keep the values already in `base`.
inline ExperimentConfig config_from_json(const nlohmann::json& raw, ExperimentConfig base = {}) {
  if (!raw.is_object()) throw ConfigError("config", "top level must be a JSON object");
  const nlohmann::json& j = raw.value("format", "") == "chiplet-manifest" ? raw.at("config") : raw;
  static const std::vector<std::string> known = {
      "subcommand", "seed", "workers", "batch", "mono_batch", "out_dir", "f0", "step", "alpha", "thresholds",
      "sigmas", "steps", "sizes", "chiplets", "dims", "totals", "square_dims", "ratios", "families", "link_ratio",
      "max_reconfig", "bump_success", "bumps_per_link_qubit", "bond_failure_scale", "qubit_cap", "export_devices",
      "calibration", "synth_median", "synth_mean", "synth_edges", "bin_width", "input"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError(key, "unknown field");
  }
  ExperimentConfig c = std::move(base);
  using detail::read_field;
  read_field(j, "subcommand", c.subcommand, "a string");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("seed", "expected a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  read_field(j, "workers", c.workers, "a non-negative integer");
  read_field(j, "batch", c.batch, "a positive integer");
  read_field(j, "mono_batch", c.mono_batch, "a positive integer");
  read_field(j, "out_dir", c.out_dir, "a path string");
  read_field(j, "f0", c.f0, "a number (GHz)");
  read_field(j, "step", c.step, "a number (GHz)");
  read_field(j, "alpha", c.alpha, "a number (GHz)");
  if (j.contains("thresholds")) {
    const auto& t = j.at("thresholds");
    if (!t.is_object()) throw ConfigError("thresholds", "expected an object with t1..t7");
    for (const auto& [key, value] : t.items()) {
      static const std::map<std::string, double CollisionThresholds::*> members = {
          {"t1", &CollisionThresholds::t1}, {"t2", &CollisionThresholds::t2}, {"t3", &CollisionThresholds::t3},
          {"t5", &CollisionThresholds::t5}, {"t6", &CollisionThresholds::t6}, {"t7", &CollisionThresholds::t7}};
      const auto it = members.find(key);
      if (it == members.end()) throw ConfigError("thresholds." + key, "unknown threshold (t1, t2, t3, t5, t6, t7)");
      if (!value.is_number()) throw ConfigError("thresholds." + key, "expected a number (GHz)");
      c.thresholds.*(it->second) = value.get<double>();
    }
  }
  read_field(j, "sigmas", c.sigmas, "a list of numbers (GHz)");
  read_field(j, "steps", c.steps, "a list of numbers (GHz)");
  read_field(j, "sizes", c.sizes, "a list of integers");
  read_field(j, "chiplets", c.chiplets, "a list of integers");
  read_field(j, "dims", c.dims, "a list of KxM strings");
  read_field(j, "totals", c.totals, "a list of integers");
  read_field(j, "square_dims", c.square_dims, "a list of integers");
  read_field(j, "ratios", c.ratios, "a list of numbers");
  read_field(j, "families", c.families, "a list of family names");
  read_field(j, "link_ratio", c.link_ratio, "a number");
  read_field(j, "max_reconfig", c.max_reconfig, "an integer");
  read_field(j, "bump_success", c.bump_success, "a probability");
  read_field(j, "bumps_per_link_qubit", c.bumps_per_link_qubit, "an integer");
  read_field(j, "bond_failure_scale", c.bond_failure_scale, "a number");
  read_field(j, "qubit_cap", c.qubit_cap, "an integer");
  read_field(j, "export_devices", c.export_devices, "a boolean");
  read_field(j, "calibration", c.calibration, "a path string");
  read_field(j, "synth_median", c.synth_median, "a probability");
  read_field(j, "synth_mean", c.synth_mean, "a probability");
  read_field(j, "synth_edges", c.synth_edges, "a positive integer");
  read_field(j, "bin_width", c.bin_width, "a number (GHz)");
  read_field(j, "input", c.input, "a path string");
  return c;
}

/// Fills empty lists with the defaults of the chosen subcommand.
inline void resolve_defaults(ExperimentConfig& c) {
  const std::string& s = c.subcommand;
  if (c.sigmas.empty()) c.sigmas = s == "sweep" ? std::vector<double>{0.1323, 0.014, 0.006} : std::vector<double>{0.014};
  if (c.steps.empty()) c.steps = s == "sweep" ? std::vector<double>{0.04, 0.05, 0.06, 0.07} : std::vector<double>{c.step};
  if (c.sizes.empty()) c.sizes = {10, 20, 50, 100, 200, 300, 500, 1000};
  if (c.chiplets.empty()) {
    if (s == "configs") c.chiplets = {20};
    else if (s == "assemble") c.chiplets = {20, 40, 60};
    else c.chiplets = {10, 20, 40, 60, 90, 120};
  }
  if (c.totals.empty()) c.totals = {120, 240, 360};
  if (c.square_dims.empty()) c.square_dims = {2, 3, 4, 5, 6, 7};
  if (c.ratios.empty()) c.ratios = {4.17, 3.0, 2.0, 1.0};
  if (c.families.empty()) {
    for (BenchFamily f : kAllFamilies) c.families.emplace_back(to_string(f));
  }
}

inline void validate_config(const ExperimentConfig& c) {
  if (std::find(subcommands().begin(), subcommands().end(), c.subcommand) == subcommands().end()) {
    std::string list;
    for (const auto& s : subcommands()) list += (list.empty() ? "" : ", ") + s;
    throw ConfigError("subcommand", "'" + c.subcommand + "' is not one of " + list);
  }
  if (!c.seed) throw ConfigError("seed", "required (there is no clock-based default)");
  if (c.batch < 1 || c.batch > 100'000'000) throw ConfigError("batch", "must be in [1, 1e8]");
  if (c.mono_batch < 1 || c.mono_batch > 100'000'000) throw ConfigError("mono_batch", "must be in [1, 1e8]");
  if (c.workers > 1024) throw ConfigError("workers", "must be in [0, 1024]");
  if (!(c.alpha < 0.0)) throw ConfigError("alpha", "anharmonicity must be negative");
  if (!std::isfinite(c.f0) || c.f0 <= 0.0) throw ConfigError("f0", "must be a positive frequency");
  if (!(c.step > 0.0)) throw ConfigError("step", "must be > 0");
  try {
    c.thresholds.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("thresholds", e.what());
  }
  for (double v : c.sigmas) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("sigmas", "every sigma must be >= 0");
  }
  for (double v : c.steps) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("steps", "every step must be > 0");
  }
  for (int v : c.sizes) {
    if (!is_expressible(v)) {
      try {
        monolithic_layout_for(v);
      } catch (const std::invalid_argument& e) {
        throw ConfigError("sizes", e.what());
      }
    }
  }
  for (int v : c.chiplets) {
    try {
      ChipletSpec::of(v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("chiplets", e.what());
    }
  }
  for (const auto& d : c.dims) {
    try {
      parse_dims(d);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("dims", e.what());
    }
  }
  for (int v : c.totals) {
    if (v < 1) throw ConfigError("totals", "every total must be >= 1");
  }
  for (int v : c.square_dims) {
    if (v < 1) throw ConfigError("square_dims", "every n must be >= 1");
  }
  for (double v : c.ratios) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("ratios", "every ratio must be > 0");
  }
  for (const auto& f : c.families) {
    try {
      bench_family_from_string(f);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("families", e.what());
    }
  }
  if (!(c.link_ratio > 0.0) || !std::isfinite(c.link_ratio)) throw ConfigError("link_ratio", "must be > 0");
  if (c.max_reconfig < 1) throw ConfigError("max_reconfig", "must be >= 1");
  if (!(c.bump_success >= 0.0 && c.bump_success <= 1.0)) throw ConfigError("bump_success", "must be in [0, 1]");
  if (c.bumps_per_link_qubit < 0) throw ConfigError("bumps_per_link_qubit", "must be >= 0");
  if (!(c.bond_failure_scale >= 0.0) || !std::isfinite(c.bond_failure_scale)) {
    throw ConfigError("bond_failure_scale", "must be >= 0");
  }
  if (c.qubit_cap < 1) throw ConfigError("qubit_cap", "must be >= 1");
  if (!(c.synth_median > 0.0 && c.synth_median <= c.synth_mean && c.synth_mean < 1.0)) {
    throw ConfigError("synth_median", "need 0 < synth_median <= synth_mean < 1");
  }
  if (c.synth_edges < 1) throw ConfigError("synth_edges", "must be >= 1");
  if (!(c.bin_width > 0.0) || !std::isfinite(c.bin_width)) throw ConfigError("bin_width", "must be > 0");
  if (c.subcommand == "ingest-calib" && c.input.empty() && c.calibration.empty()) {
    throw ConfigError("input", "ingest-calib needs a calibration snapshot file");
  }
}

// ---------------------------------------------------------------------------
// Output staging

/// Files written so far under the staging directory.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path staging) : root_(std::move(staging)) {}

  void write(const std::string& relative, const std::string& text) {
    write_text_file(root_ / relative, text);
    files_.push_back(relative);
  }

  const std::filesystem::path& root() const noexcept { return root_; }
  const std::vector<std::string>& files() const noexcept { return files_; }

 private:
  std::filesystem::path root_;
  std::vector<std::string> files_;
};

inline std::filesystem::path resolve_out_dir(const ExperimentConfig& c) {
  if (!c.out_dir.empty()) return c.out_dir;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return kDefaultOutDir;
}

namespace detail {

inline std::string csv_row(std::initializer_list<std::string> cells) {
  std::string s;
  bool first = true;
  for (const auto& c : cells) {
    if (!first) s += ',';
    s += c;
    first = false;
  }
  return s + '\n';
}

inline std::string num(double x) { return format_number(x); }
inline std::string num(std::uint64_t x) { return std::to_string(x); }
inline std::string num(int x) { return std::to_string(x); }

inline DetuningBins load_bins(const ExperimentConfig& c) {
  if (!c.calibration.empty()) {
    try {
      return ingest_calibration(c.calibration, c.bin_width);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("calibration", e.what());
    }
  }
  return synth_calibration(c.synth_median, c.synth_mean, c.synth_edges, *c.seed, c.bin_width);
}

inline std::string bins_csv(const DetuningBins& bins) {
  std::string out = "bin,lo_ghz,hi_ghz,count,median,mean\n";
  for (std::size_t b = 0; b < bins.bins().size(); ++b) {
    const auto& v = bins.bins()[b];
    out += csv_row({std::to_string(b), num(static_cast<double>(b) * bins.bin_width()),
                    num(static_cast<double>(b + 1) * bins.bin_width()), std::to_string(v.size()),
                    v.empty() ? "" : num(median_of(v)), v.empty() ? "" : num(mean_of(v))});
  }
  return out;
}

inline std::string bins_plot(const DetuningBins& bins) {
  std::string out = "# detuning_ghz median_infidelity\n";
  for (std::size_t b = 0; b < bins.bins().size(); ++b) {
    if (bins.bins()[b].empty()) continue;
    out += num((static_cast<double>(b) + 0.5) * bins.bin_width()) + ' ' + num(median_of(bins.bins()[b])) + '\n';
  }
  return out;
}

/// Most square k x m with k * m = total / chiplet, if the chiplet divides the total.
inline std::optional<McmSpec> spec_for_total(int chiplet, int total) {
  if (total % chiplet != 0) return std::nullopt;
  const int n = total / chiplet;
  int k = static_cast<int>(std::sqrt(static_cast<double>(n)));
  while (n % k != 0) --k;
  return McmSpec{ChipletSpec::of(chiplet), k, n / k};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands. Each writes its files and returns summary text.

inline std::string run_sweep(const ExperimentConfig& c, OutputSet& out) {
  using namespace detail;
  std::string csv = "size,step_ghz,sigma_ghz,batch,yield,ci95\n";
  std::map<std::string, std::string> curves;
  std::ostringstream summary;
  summary << "Collision-free yield sweep, batch " << c.batch << "\n";
  for (int size : c.sizes) {
    const McmSpec layout = monolithic_layout_for(size);
    const Topology t = build_monolithic(layout);
    for (double sigma : c.sigmas) {
      for (double step : c.steps) {
        const YieldEstimate y = estimate_yield(t, c.plan(sigma, step), c.batch, *c.seed, resolve_workers(c.workers));
        csv += csv_row({num(size), num(step), num(sigma), num(c.batch), num(y.yield), num(y.ci95)});
        const std::string key = "plot/sweep_sigma-" + num(sigma) + "_step-" + num(step) + ".dat";
        if (!curves.count(key)) curves[key] = "# size yield\n";
        curves[key] += num(size) + ' ' + num(y.yield) + '\n';
        summary << "  size " << size << " (" << layout.chiplet.size << "q tiles " << layout.dims() << ") sigma "
                << num(sigma) << " step " << num(step) << ": yield " << num(y.yield) << " +/- " << num(y.ci95) << "\n";
      }
    }
  }
  out.write("sweep.csv", csv);
  for (const auto& [name, text] : curves) out.write(name, text);
  return summary.str();
}

inline std::string run_configs(const ExperimentConfig& c, OutputSet& out) {
  using namespace detail;
  std::string csv =
      "chiplet,dims,slots,qubits,chiplet_yield,available,log10_configs,configs,mcm_upper_bound,mono_yield,mono_good,gain\n";
  std::ostringstream summary;
  summary << "Configuration counts, chiplet batch " << c.batch << ", monolithic batch " << c.mono_batch << "\n";
  const FrequencyPlan plan = c.plan(c.sigmas.front(), c.step);
  for (int chip : c.chiplets) {
    const Topology ct = build_chiplet(ChipletSpec::of(chip));
    const YieldEstimate cy =
        estimate_yield(ct, plan, c.batch, chiplet_population_seed(*c.seed, chip), resolve_workers(c.workers));
    summary << "  " << chip << "-qubit chiplets: " << cy.collision_free << "/" << c.batch << " collision-free\n";
    std::vector<McmSpec> specs;
    if (c.dims.empty()) {
      for (const McmSpec& s : enumerate_mcm_configs(c.qubit_cap, {chip})) specs.push_back(s);
    } else {
      for (const auto& d : c.dims) {
        const auto [k, m] = parse_dims(d);
        specs.push_back(McmSpec{ChipletSpec::of(chip), k, m});
      }
    }
    std::string plot = "# slots log10_configs\n";
    for (const McmSpec& s : specs) {
      const int slots = s.chiplet_count();
      const ConfigCount cc = config_count(static_cast<std::int64_t>(cy.collision_free), slots);
      const Topology mono = build_monolithic(s);
      const YieldEstimate my =
          estimate_yield(mono, plan, c.mono_batch, mono_population_seed(*c.seed, s), resolve_workers(c.workers));
      const std::int64_t bound = mcm_output_upper_bound(cy.yield, static_cast<std::int64_t>(c.mono_batch),
                                                        s.qubit_count(), chip, s.rows, s.cols);
      const std::string gain = my.collision_free ? num(static_cast<double>(bound) / static_cast<double>(my.collision_free))
                                                 : std::string("inf");
      csv += csv_row({num(chip), s.dims(), num(slots), num(s.qubit_count()), num(cy.yield), num(cy.collision_free),
                      num(cc.log10), cc.value.str(), std::to_string(bound), num(my.yield), num(my.collision_free),
                      gain});
      plot += num(slots) + ' ' + num(cc.log10) + '\n';
    }
    out.write("plot/configs_chiplet-" + num(chip) + ".dat", plot);
  }
  out.write("configs.csv", csv);
  return summary.str();
}

inline std::vector<McmSpec> assemble_specs(const ExperimentConfig& c) {
  std::vector<McmSpec> specs;
  for (int chip : c.chiplets) {
    if (!c.dims.empty()) {
      for (const auto& d : c.dims) {
        const auto [k, m] = parse_dims(d);
        specs.push_back(McmSpec{ChipletSpec::of(chip), k, m});
      }
    } else {
      for (int total : c.totals) {
        if (auto s = detail::spec_for_total(chip, total)) specs.push_back(*s);
      }
    }
  }
  for (const auto& s : specs) {
    try {
      s.validate(c.qubit_cap);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("dims", e.what());
    }
  }
  return specs;
}

inline std::string run_assemble(const ExperimentConfig& c, OutputSet& out) {
  using namespace detail;
  const DetuningBins bins = load_bins(c);
  const FrequencyPlan plan = c.plan(c.sigmas.front(), c.step);
  const double scaled = scaled_bump_success(c.bump_success, c.bond_failure_scale);
  std::string csv =
      "chiplet,dims,qubits,chiplet_batch,chiplet_yield,mcms,chiplets_used,leftovers,failed_windows,link_qubits,"
      "bond_factor,post_assembly_yield,bond_factor_scaled,post_assembly_yield_scaled,mono_batch,mono_yield,"
      "improvement,improvement_scaled\n";
  std::string hist = "chiplet,dims,reconfigurations,mcms\n";
  std::map<int, std::string> plots;
  std::string mono_plot = "# qubits mono_yield\n";
  std::ostringstream summary;
  summary << "MCM assembly, batch " << c.batch << " monolithic-equivalent, max " << c.max_reconfig
          << " placements per window\n";
  PopulationOptions opt;
  opt.batch = c.batch;
  opt.seed = *c.seed;
  opt.workers = resolve_workers(c.workers);
  opt.max_reconfig = c.max_reconfig;
  opt.cap_to_monolithic = false;
  opt.bump_success = c.bump_success;
  opt.bumps_per_link_qubit = c.bumps_per_link_qubit;
  for (const McmSpec& s : assemble_specs(c)) {
    const PairedPopulation pop = build_population(s, plan, bins, opt);
    const AssemblyResult& a = pop.assembly;
    const double bond_scaled =
        bond_yield_factor(static_cast<std::int64_t>(a.link_qubits_per_mcm), scaled, c.bumps_per_link_qubit);
    const double yield_scaled = a.fabricated_batch ? static_cast<double>(a.chiplets_used) /
                                                         static_cast<double>(a.fabricated_batch) * bond_scaled
                                                   : 0.0;
    auto ratio = [&](double v) {
      return pop.mono_yield.yield > 0.0 ? num(v / pop.mono_yield.yield) : std::string("inf");
    };
    csv += csv_row({num(s.chiplet.size), s.dims(), num(s.qubit_count()), num(a.fabricated_batch),
                    num(pop.chiplet_yield.yield), std::to_string(a.mcms.size()), std::to_string(a.chiplets_used),
                    std::to_string(a.leftovers), std::to_string(a.failed_windows),
                    std::to_string(a.link_qubits_per_mcm), num(a.bond_yield_factor), num(a.post_assembly_yield),
                    num(bond_scaled), num(yield_scaled), num(c.batch), num(pop.mono_yield.yield),
                    ratio(a.post_assembly_yield), ratio(yield_scaled)});
    for (const auto& [attempts, count] : a.reconfig_histogram) {
      hist += csv_row({num(s.chiplet.size), s.dims(), num(attempts), std::to_string(count)});
    }
    if (!plots.count(s.chiplet.size)) plots[s.chiplet.size] = "# qubits post_assembly_yield\n";
    plots[s.chiplet.size] += num(s.qubit_count()) + ' ' + num(a.post_assembly_yield) + '\n';
    mono_plot += num(s.qubit_count()) + ' ' + num(pop.mono_yield.yield) + '\n';
    summary << "  " << s.chiplet.size << "q " << s.dims() << " (" << s.qubit_count() << " qubits): " << a.mcms.size()
            << " MCMs, post-assembly yield " << num(a.post_assembly_yield) << " (x" << num(c.bond_failure_scale)
            << " bond failure: " << num(yield_scaled) << "), monolithic " << num(pop.mono_yield.yield) << "\n";
    if (c.export_devices) {
      const auto devices = mcms_with_link_noise(pop, bins, c.link_ratio);
      const std::string dir = "devices/" + num(s.chiplet.size) + "q_" + s.dims() + "/";
      for (std::size_t i = 0; i < devices.size(); ++i) {
        out.write(dir + "mcm_" + std::to_string(i) + ".json", device_to_json(devices[i]).dump(1) + "\n");
      }
    }
  }
  out.write("assembly.csv", csv);
  out.write("reconfig_histogram.csv", hist);
  for (const auto& [chip, text] : plots) out.write("plot/assembly_chiplet-" + num(chip) + ".dat", text);
  out.write("plot/assembly_mono.dat", mono_plot);
  return summary.str();
}

inline std::string run_heatmap(const ExperimentConfig& c, OutputSet& out) {
  using namespace detail;
  const DetuningBins bins = load_bins(c);
  const FrequencyPlan plan = c.plan(c.sigmas.front(), c.step);
  PopulationOptions opt;
  opt.batch = c.batch;
  opt.seed = *c.seed;
  opt.workers = resolve_workers(c.workers);
  opt.max_reconfig = c.max_reconfig;
  std::vector<PairedPopulation> pops;
  for (const McmSpec& s : square_configs(c.chiplets, c.square_dims, c.qubit_cap)) {
    pops.push_back(build_population(s, plan, bins, opt));
  }
  std::string cells_csv = "ratio,chiplet,dims,qubits,feasible,e_mcm,e_mono,value,mcms,monolithic\n";
  std::ostringstream summary;
  summary << "E_MCM / E_mono heatmap, batch " << c.batch << ", calibration median " << num(bins.median()) << " mean "
          << num(bins.mean()) << "\n";
  bool any_feasible = false;
  for (double r : c.ratios) {
    std::string header = "chiplet";
    for (int n : c.square_dims) header += "," + num(n) + "x" + num(n);
    std::string matrix = header + "\n";
    std::size_t p = 0;
    summary << "  ratio " << num(r) << ":\n";
    for (int chip : c.chiplets) {
      std::string row = num(chip);
      std::string plot = "# n value\n";
      for (int n : c.square_dims) {
        if (n * n * chip > c.qubit_cap) {
          row += ",NA";
          continue;
        }
        const HeatmapCell cell = heatmap_cell(pops[p++], bins, r);
        any_feasible = any_feasible || cell.feasible;
        row += "," + (cell.feasible ? num(cell.value) : std::string("INFEASIBLE"));
        cells_csv += csv_row({num(r), num(chip), num(n) + "x" + num(n), num(n * n * chip), cell.feasible ? "1" : "0",
                              cell.feasible ? num(cell.e_mcm) : "", cell.feasible ? num(cell.e_mono) : "",
                              cell.feasible ? num(cell.value) : "INFEASIBLE", std::to_string(cell.mcm_count),
                              std::to_string(cell.mono_count)});
        if (cell.feasible) plot += num(n) + ' ' + num(cell.value) + '\n';
        summary << "    " << chip << "q " << n << "x" << n << ": "
                << (cell.feasible ? num(cell.value) : std::string("INFEASIBLE")) << "\n";
      }
      matrix += row + "\n";
      out.write("plot/heatmap_r-" + num(r) + "_chiplet-" + num(chip) + ".dat", plot);
    }
    out.write("heatmap_r-" + num(r) + ".csv", matrix);
  }
  out.write("heatmap_cells.csv", cells_csv);
  if (!pops.empty() && !any_feasible) throw InfeasibleError("every heatmap cell is infeasible (monolithic yield 0)");
  return summary.str();
}

inline std::string run_bench(const ExperimentConfig& c, OutputSet& out) {
  using namespace detail;
  const DetuningBins bins = load_bins(c);
  const FrequencyPlan plan = c.plan(c.sigmas.front(), c.step);
  PopulationOptions opt;
  opt.batch = c.batch;
  opt.seed = *c.seed;
  opt.workers = resolve_workers(c.workers);
  opt.max_reconfig = c.max_reconfig;
  std::string csv = "family,chiplet,dims,ratio\n";
  std::string detail_csv =
      "family,chiplet,dims,qubits,logical_qubits,link_ratio,pre_routing_2q,mono_routed_2q,mcm_routed_2q,mcms,"
      "monolithic,ratio\n";
  std::map<std::string, std::string> plots;
  std::ostringstream summary;
  summary << "Benchmark fidelity-product ratio F_MCM / F_mono at link ratio " << num(c.link_ratio) << ", batch "
          << c.batch << "\n";
  const std::uint64_t circuit_seed = derive_key(*c.seed, {stream::kCircuit});
  bool any_feasible = false;
  std::size_t total = 0;
  for (const McmSpec& s : square_configs(c.chiplets, c.square_dims, c.qubit_cap)) {
    const PairedPopulation pop = build_population(s, plan, bins, opt);
    for (const auto& name : c.families) {
      const BenchFamily f = bench_family_from_string(name);
      const BenchComparison r = compare_architectures(f, pop, bins, c.link_ratio, circuit_seed);
      ++total;
      any_feasible = any_feasible || r.feasible;
      const std::string value = r.feasible ? num(r.ratio) : std::string("INFEASIBLE");
      csv += csv_row({name, num(s.chiplet.size), s.dims(), value});
      detail_csv += csv_row({name, num(s.chiplet.size), s.dims(), num(s.qubit_count()), num(static_cast<int>(r.logical_qubits)),
                             num(c.link_ratio), std::to_string(r.pre_routing_2q), std::to_string(r.mono_routed_2q),
                             std::to_string(r.mcm_routed_2q), std::to_string(r.mcm_count),
                             std::to_string(r.mono_count), value});
      const std::string key = "plot/bench_" + name + "_chiplet-" + num(s.chiplet.size) + ".dat";
      if (!plots.count(key)) plots[key] = "# qubits ratio\n";
      if (r.feasible) plots[key] += num(s.qubit_count()) + ' ' + num(r.ratio) + '\n';
      const std::string circuit_file = "circuits/" + name + "_" + std::to_string(r.logical_qubits) + ".txt";
      if (std::find(out.files().begin(), out.files().end(), circuit_file) == out.files().end()) {
        out.write(circuit_file, circuit_to_text(generate_circuit(f, r.logical_qubits, circuit_seed)));
      }
      summary << "  " << name << " " << s.chiplet.size << "q " << s.dims() << ": " << value << "\n";
    }
  }
  out.write("bench.csv", csv);
  out.write("bench_detail.csv", detail_csv);
  for (const auto& [name, text] : plots) out.write(name, text);
  if (total > 0 && !any_feasible) throw InfeasibleError("every benchmark comparison is infeasible (monolithic yield 0)");
  return summary.str();
}

inline std::string calibration_summary(const char* what, const DetuningBins& bins) {
  std::ostringstream s;
  s << what << ": " << bins.sample_count() << " edges, median " << format_number(bins.median()) << ", mean "
    << format_number(bins.mean()) << ", bin width " << format_number(bins.bin_width()) << " GHz\n";
  return s.str();
}

inline std::string run_ingest(const ExperimentConfig& c, OutputSet& out) {
  const std::string path = c.input.empty() ? c.calibration : c.input;
  DetuningBins bins;
  try {
    bins = ingest_calibration(path, c.bin_width);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("input", e.what());
  }
  out.write("bins.csv", detail::bins_csv(bins));
  out.write("plot/bins_median.dat", detail::bins_plot(bins));
  return calibration_summary("Ingested calibration", bins);
}

inline std::string run_synth(const ExperimentConfig& c, OutputSet& out) {
  const DetuningBins bins = synth_calibration(c.synth_median, c.synth_mean, c.synth_edges, *c.seed, c.bin_width);
  out.write("calibration.json", calibration_to_json(export_snapshot(bins)).dump(1) + "\n");
  out.write("bins.csv", detail::bins_csv(bins));
  out.write("plot/bins_median.dat", detail::bins_plot(bins));
  return calibration_summary("Synthetic calibration", bins);
}

inline nlohmann::json manifest_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["format"] = "chiplet-manifest";
  j["version"] = 1;
  j["tool"] = kToolName;
  j["tool_version"] = kToolVersion;
  j["subcommand"] = c.subcommand;
  j["seed"] = *c.seed;
  j["config"] = config_to_json(c);
  return j;
}

/// Runs one experiment; throws ConfigError, InfeasibleError or other
/// exceptions. Returns the output directory.
inline std::filesystem::path execute(ExperimentConfig c) {
  resolve_defaults(c);
  validate_config(c);
  namespace fs = std::filesystem;
  const fs::path out_dir = resolve_out_dir(c);
  fs::path staging = out_dir;
  staging += ".staging";
  fs::remove_all(staging);
  fs::create_directories(staging);
  try {
    OutputSet out(staging);
    std::string summary;
    if (c.subcommand == "sweep") summary = run_sweep(c, out);
    else if (c.subcommand == "configs") summary = run_configs(c, out);
    else if (c.subcommand == "assemble") summary = run_assemble(c, out);
    else if (c.subcommand == "heatmap") summary = run_heatmap(c, out);
    else if (c.subcommand == "bench") summary = run_bench(c, out);
    else if (c.subcommand == "ingest-calib") summary = run_ingest(c, out);
    else summary = run_synth(c, out);
    out.write("summary.txt", std::string(kToolName) + " " + kToolVersion + " " + c.subcommand + ", seed " +
                                 std::to_string(*c.seed) + "\n" + summary);
    out.write("manifest.json", manifest_json(c).dump(2) + "\n");

    fs::create_directories(out_dir);
    for (const auto& entry : fs::directory_iterator(staging)) {
      const fs::path target = out_dir / entry.path().filename();
      fs::remove_all(target);
      fs::rename(entry.path(), target);
    }
    fs::remove_all(staging);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
  return out_dir;
}

/// execute() with exceptions mapped to exit codes and diagnostics on `err`.
inline int run_experiment(const ExperimentConfig& c, std::ostream& err = std::cerr, std::ostream* log = nullptr) {
  try {
    const auto dir = execute(c);
    if (log) *log << "results written to " << dir.string() << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace chiplet
