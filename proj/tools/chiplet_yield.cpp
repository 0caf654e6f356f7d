// chiplet-yield: command-line front end for the experiment drivers.
//
//   chiplet-yield <subcommand> --seed N [--config file.json] [flags]
//
// A config file (or a manifest from an earlier run) supplies defaults; flags
// given on the command line override it.

#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "chiplet/experiment.hpp"

namespace {

using chiplet::ExperimentConfig;

// Registers every flag on `app`; each parsed flag queues an override.
struct FlagSet {
  std::vector<std::function<void(ExperimentConfig&)>> overrides;
  std::string config_path;

  template <typename T>
  void add(CLI::App* app, const std::string& name, const std::string& help, T ExperimentConfig::*member) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, help);
    if constexpr (requires { value->begin(); } && !std::is_same_v<T, std::string>) opt->delimiter(',');
    pending_.push_back([opt, value, member](std::vector<std::function<void(ExperimentConfig&)>>& out) {
      if (opt->count() > 0) out.push_back([value, member](ExperimentConfig& c) { c.*member = *value; });
    });
  }

  void register_all(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file or manifest from an earlier run");
    auto seed = std::make_shared<std::uint64_t>();
    CLI::Option* seed_opt = app->add_option("--seed", *seed, "master seed (required)");
    pending_.push_back([seed_opt, seed](auto& out) {
      if (seed_opt->count() > 0) out.push_back([seed](ExperimentConfig& c) { c.seed = *seed; });
    });
    add(app, "--workers", "worker threads, 0 = all cores (does not change results)", &ExperimentConfig::workers);
    add(app, "--batch", "devices per Monte Carlo batch", &ExperimentConfig::batch);
    add(app, "--mono-batch", "monolithic batch for the configs output bound", &ExperimentConfig::mono_batch);
    add(app, "--out", "output directory (default $CHIPLET_OUT_DIR or ./chiplet-out)", &ExperimentConfig::out_dir);
    add(app, "--f0", "F0 target frequency, GHz", &ExperimentConfig::f0);
    add(app, "--step", "F1-F0 = F2-F1 detuning step, GHz", &ExperimentConfig::step);
    add(app, "--alpha", "anharmonicity, GHz (negative)", &ExperimentConfig::alpha);
    add(app, "--sigmas", "fabrication spreads, GHz (comma separated)", &ExperimentConfig::sigmas);
    add(app, "--steps", "detuning steps for sweep, GHz", &ExperimentConfig::steps);
    add(app, "--sizes", "monolithic sizes for sweep", &ExperimentConfig::sizes);
    add(app, "--chiplet,--chiplets", "chiplet sizes", &ExperimentConfig::chiplets);
    add(app, "--dims", "MCM dims such as 3x3 (comma separated)", &ExperimentConfig::dims);
    add(app, "--totals", "total MCM sizes for assemble", &ExperimentConfig::totals);
    add(app, "--square-dims", "n values for n x n heatmap and bench configs", &ExperimentConfig::square_dims);
    add(app, "--ratios", "link / on-chip infidelity ratios for heatmap", &ExperimentConfig::ratios);
    add(app, "--families", "benchmark families", &ExperimentConfig::families);
    add(app, "--link-ratio", "link / on-chip infidelity ratio for bench and device export", &ExperimentConfig::link_ratio);
    add(app, "--max-reconfig", "placements tried per assembly window", &ExperimentConfig::max_reconfig);
    add(app, "--bump-success", "per-bump bond success probability", &ExperimentConfig::bump_success);
    add(app, "--bumps-per-link", "bump bonds per link qubit", &ExperimentConfig::bumps_per_link_qubit);
    add(app, "--bond-failure-scale", "bump failure multiplier for the sensitivity columns",
        &ExperimentConfig::bond_failure_scale);
    add(app, "--qubit-cap", "largest MCM considered", &ExperimentConfig::qubit_cap);
    add(app, "--export-devices", "write one JSON file per assembled MCM (true/false)", &ExperimentConfig::export_devices);
    add(app, "--calibration", "calibration snapshot file (default: synthetic)", &ExperimentConfig::calibration);
    add(app, "--synth-median", "synthetic calibration median infidelity", &ExperimentConfig::synth_median);
    add(app, "--synth-mean", "synthetic calibration mean infidelity", &ExperimentConfig::synth_mean);
    add(app, "--synth-edges", "synthetic calibration edge count", &ExperimentConfig::synth_edges);
    add(app, "--bin-width", "detuning bin width, GHz", &ExperimentConfig::bin_width);
    add(app, "--input", "snapshot file for ingest-calib", &ExperimentConfig::input);
  }

  void collect() {
    for (auto& p : pending_) p(overrides);
  }

 private:
  std::vector<std::function<void(std::vector<std::function<void(ExperimentConfig&)>>&)>> pending_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-collision yield and chiplet MCM assembly experiments"};
  app.set_version_flag("--version", std::string(chiplet::kToolVersion));
  app.require_subcommand(1);

  std::vector<std::pair<CLI::App*, std::unique_ptr<FlagSet>>> subs;
  const std::vector<std::pair<std::string, std::string>> descriptions = {
      {"sweep", "yield vs. size over detuning steps and fabrication spreads"},
      {"configs", "chiplet configuration counts and the MCM output bound"},
      {"assemble", "assemble MCMs and compare post-assembly yield with monolithic"},
      {"heatmap", "E_MCM / E_mono for square MCMs at several link ratios"},
      {"bench", "benchmark fidelity-product ratio F_MCM / F_mono"},
      {"ingest-calib", "bin a calibration snapshot by detuning"},
      {"synth-calib", "write a synthetic calibration snapshot"}};
  for (const auto& [name, help] : descriptions) {
    CLI::App* sub = app.add_subcommand(name, help);
    auto flags = std::make_unique<FlagSet>();
    flags->register_all(sub);
    subs.emplace_back(sub, std::move(flags));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? chiplet::kExitOk : chiplet::kExitConfig;
  }

  for (auto& [sub, flags] : subs) {
    if (!sub->parsed()) continue;
    ExperimentConfig config;
    try {
      if (!flags->config_path.empty()) {
        std::ifstream in(flags->config_path);
        if (!in) throw chiplet::ConfigError("config", "cannot open " + flags->config_path);
        nlohmann::json j;
        try {
          in >> j;
        } catch (const nlohmann::json::parse_error& e) {
          throw chiplet::ConfigError("config", std::string("not valid JSON: ") + e.what());
        }
        config = chiplet::config_from_json(j);
      }
    } catch (const chiplet::ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return chiplet::kExitConfig;
    }
    config.subcommand = sub->get_name();
    flags->collect();
    for (auto& apply : flags->overrides) apply(config);
    return chiplet::run_experiment(config, std::cerr, &std::cout);
  }
  return chiplet::kExitConfig;
}
