#pragma once

/**
 * @file noise.hpp
 * @brief Empirical detuning -> two-qubit infidelity model.
 *
 * Calibration snapshots are binned by |detuning| (default 0.1 GHz bins). An
 * edge's infidelity is a uniform draw from the bin of its realized detuning,
 * falling back to the nearest populated bin. Link edges get a fresh draw
 * scaled by e_link / e_chip.
 *
 * Snapshot file (JSON, version 1):
 *
 *     {
 *       "format": "chiplet-calibration", "version": 1,
 *       "cycles": ["2021-12-01", ...],                 // optional
 *       "qubits": [{"id": 0, "frequency_ghz": 5.01}, ...],
 *       "gates":  [{"pair": [0, 1], "infidelity": [0.011, 0.013]}, ...]
 *     }
 *
 * Each gate lists one infidelity per calibration cycle; they are averaged.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/lognormal.hpp>
#include <json.hpp>

#include "chiplet/device.hpp"
#include "chiplet/rng.hpp"

namespace chiplet {

struct CalibrationSnapshot {
  struct Qubit {
    std::int64_t id = 0;
    double frequency_ghz = 0.0;
  };
  struct Gate {
    std::int64_t a = 0;
    std::int64_t b = 0;
    std::vector<double> infidelity;  // one per cycle
  };

  std::vector<std::string> cycles;
  std::vector<Qubit> qubits;
  std::vector<Gate> gates;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

class DetuningBins {
 public:
  explicit DetuningBins(double bin_width = 0.1) : bin_width_(bin_width) {
    if (!(bin_width > 0.0) || !std::isfinite(bin_width)) throw std::invalid_argument("bin width must be positive");
  }

  double bin_width() const noexcept { return bin_width_; }

  std::size_t bin_index(double detuning) const {
    return static_cast<std::size_t>(std::floor(std::abs(detuning) / bin_width_));
  }

  void add(double detuning, double infidelity) {
    if (!(infidelity >= 0.0 && infidelity <= 1.0)) {
      throw std::invalid_argument("infidelity " + std::to_string(infidelity) + " outside [0, 1]");
    }
    if (!std::isfinite(detuning)) throw std::invalid_argument("non-finite detuning");
    const std::size_t b = bin_index(detuning);
    if (b >= bins_.size()) bins_.resize(b + 1);
    bins_[b].push_back(infidelity);
    finalized_ = false;
  }

  /// Recomputes the summary and the nearest-populated-bin table.
  void finalize() {
    std::vector<double> all;
    for (const auto& b : bins_) all.insert(all.end(), b.begin(), b.end());
    median_ = median_of(all);
    mean_ = mean_of(all);
    sample_count_ = all.size();
    nearest_.assign(bins_.size(), 0);
    for (std::size_t i = 0; i < bins_.size(); ++i) {
      std::optional<std::size_t> best;
      for (std::size_t d = 0; d < bins_.size() && !best; ++d) {
        // Ties go to the lower index.
        if (d <= i && !bins_[i - d].empty()) best = i - d;
        else if (i + d < bins_.size() && !bins_[i + d].empty()) best = i + d;
      }
      nearest_[i] = best.value_or(0);
    }
    finalized_ = true;
  }

  const std::vector<std::vector<double>>& bins() const noexcept { return bins_; }
  std::size_t sample_count() const noexcept { return sample_count_; }
  bool empty() const noexcept { return sample_count_ == 0; }
  double median() const noexcept { return median_; }
  double mean() const noexcept { return mean_; }

  /// Bin that serves draws for `detuning`.
  std::size_t serving_bin(double detuning) const {
    if (!finalized_) throw std::logic_error("DetuningBins used before finalize()");
    if (empty()) throw std::runtime_error("all detuning bins are empty");
    const std::size_t b = std::min(bin_index(detuning), bins_.size() - 1);
    return nearest_[b];
  }

  bool operator==(const DetuningBins& o) const { return bin_width_ == o.bin_width_ && bins_ == o.bins_; }

 private:
  double bin_width_;
  std::vector<std::vector<double>> bins_;
  std::vector<std::size_t> nearest_;
  double median_ = 0.0;
  double mean_ = 0.0;
  std::size_t sample_count_ = 0;
  bool finalized_ = false;
};

// ---------------------------------------------------------------------------
// Calibration snapshots

inline CalibrationSnapshot parse_calibration(const nlohmann::json& j) {
  auto fail = [](const std::string& what) { throw std::invalid_argument("calibration snapshot: " + what); };
  if (!j.is_object()) fail("top level must be an object");
  if (j.contains("version") && j.at("version") != 1) fail("unsupported version " + j.at("version").dump());
  if (!j.contains("qubits") || !j.at("qubits").is_array()) fail("missing 'qubits' array");
  if (!j.contains("gates") || !j.at("gates").is_array()) fail("missing 'gates' array");

  CalibrationSnapshot snap;
  if (j.contains("cycles")) {
    for (const auto& c : j.at("cycles")) snap.cycles.push_back(c.is_string() ? c.get<std::string>() : c.dump());
  }
  std::set<std::int64_t> ids;
  for (std::size_t i = 0; i < j.at("qubits").size(); ++i) {
    const auto& q = j.at("qubits")[i];
    const std::string where = "qubits[" + std::to_string(i) + "]";
    if (!q.is_object() || !q.contains("id") || !q.at("id").is_number_integer()) fail(where + ": integer 'id' required");
    if (!q.contains("frequency_ghz") || !q.at("frequency_ghz").is_number()) fail(where + ": numeric 'frequency_ghz' required");
    CalibrationSnapshot::Qubit rec{q.at("id").get<std::int64_t>(), q.at("frequency_ghz").get<double>()};
    if (!std::isfinite(rec.frequency_ghz)) fail(where + ": non-finite frequency");
    if (!ids.insert(rec.id).second) fail(where + ": duplicate qubit id " + std::to_string(rec.id));
    snap.qubits.push_back(rec);
  }
  for (std::size_t i = 0; i < j.at("gates").size(); ++i) {
    const auto& g = j.at("gates")[i];
    const std::string where = "gates[" + std::to_string(i) + "]";
    if (!g.is_object() || !g.contains("pair") || !g.at("pair").is_array() || g.at("pair").size() != 2) {
      fail(where + ": 'pair' of two qubit ids required");
    }
    if (!g.at("pair")[0].is_number_integer() || !g.at("pair")[1].is_number_integer()) {
      fail(where + ": 'pair' entries must be integer qubit ids");
    }
    CalibrationSnapshot::Gate rec;
    rec.a = g.at("pair")[0].get<std::int64_t>();
    rec.b = g.at("pair")[1].get<std::int64_t>();
    if (!ids.count(rec.a) || !ids.count(rec.b)) fail(where + ": references an undeclared qubit");
    if (rec.a == rec.b) fail(where + ": pair repeats a qubit");
    const auto& inf = g.contains("infidelity") ? g.at("infidelity") : nlohmann::json();
    if (inf.is_number()) {
      rec.infidelity.push_back(inf.get<double>());
    } else if (inf.is_array() && !inf.empty()) {
      for (const auto& v : inf) {
        if (!v.is_number()) fail(where + ": infidelity values must be numbers");
        rec.infidelity.push_back(v.get<double>());
      }
    } else {
      fail(where + ": 'infidelity' must be a number or non-empty array");
    }
    for (double v : rec.infidelity) {
      if (!(v >= 0.0 && v <= 1.0)) fail(where + ": infidelity " + std::to_string(v) + " outside [0, 1]");
    }
    snap.gates.push_back(std::move(rec));
  }
  if (snap.gates.empty()) fail("empty gate set");
  return snap;
}

inline nlohmann::json calibration_to_json(const CalibrationSnapshot& snap) {
  nlohmann::json j;
  j["format"] = "chiplet-calibration";
  j["version"] = 1;
  j["cycles"] = snap.cycles;
  j["qubits"] = nlohmann::json::array();
  for (const auto& q : snap.qubits) j["qubits"].push_back({{"id", q.id}, {"frequency_ghz", q.frequency_ghz}});
  j["gates"] = nlohmann::json::array();
  for (const auto& g : snap.gates) j["gates"].push_back({{"pair", {g.a, g.b}}, {"infidelity", g.infidelity}});
  return j;
}

/// Bins a snapshot: one sample per gate (its cycle average) at its |detuning|.
inline DetuningBins bins_from_snapshot(const CalibrationSnapshot& snap, double bin_width = 0.1) {
  if (snap.gates.empty()) throw std::invalid_argument("calibration snapshot: empty gate set");
  std::map<std::int64_t, double> freq;
  for (const auto& q : snap.qubits) freq[q.id] = q.frequency_ghz;
  DetuningBins bins(bin_width);
  for (const auto& g : snap.gates) {
    if (!freq.count(g.a) || !freq.count(g.b)) throw std::invalid_argument("calibration snapshot: undeclared qubit");
    bins.add(freq.at(g.a) - freq.at(g.b), mean_of(g.infidelity));
  }
  bins.finalize();
  return bins;
}

inline DetuningBins ingest_calibration(const std::filesystem::path& path, double bin_width = 0.1) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open calibration file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("calibration file " + path.string() + " is not valid JSON: " + e.what());
  }
  return bins_from_snapshot(parse_calibration(j), bin_width);
}

/// A snapshot that ingests back to exactly these bins: each sample becomes a
/// qubit pair detuned by its bin center.
inline CalibrationSnapshot export_snapshot(const DetuningBins& bins, double base_ghz = 5.0) {
  CalibrationSnapshot snap;
  snap.cycles = {"synthetic"};
  std::int64_t next = 0;
  for (std::size_t b = 0; b < bins.bins().size(); ++b) {
    const double detuning = (static_cast<double>(b) + 0.5) * bins.bin_width();
    for (double v : bins.bins()[b]) {
      snap.qubits.push_back({next, base_ghz});
      snap.qubits.push_back({next + 1, base_ghz + detuning});
      snap.gates.push_back({next, next + 1, {v}});
      next += 2;
    }
  }
  return snap;
}

/**
 * Synthetic stand-in for a real calibration snapshot: log-normal infidelities
 * moment-matched to the target median and mean, drawn by jittered stratified
 * sampling so the realized summary lands close to the targets, and spread
 * uniformly over detunings in [0, max_detuning).
 */
inline DetuningBins synth_calibration(double target_median, double target_mean, std::size_t edges,
                                      std::uint64_t seed, double bin_width = 0.1, double max_detuning = 0.4) {
  if (!(target_median > 0.0 && target_median <= target_mean && target_mean < 1.0)) {
    throw std::invalid_argument("synthetic calibration needs 0 < median <= mean < 1");
  }
  if (edges == 0) throw std::invalid_argument("synthetic calibration needs at least one edge");
  const double mu = std::log(target_median);
  const double s = std::sqrt(2.0 * std::log(target_mean / target_median));
  CounterRng rng(seed, {stream::kSynth});
  const boost::math::lognormal_distribution<double> dist(mu, s > 0.0 ? s : 1.0);
  std::vector<double> values(edges);
  for (std::size_t i = 0; i < edges; ++i) {
    const double u = (static_cast<double>(i) + rng.uniform()) / static_cast<double>(edges);
    values[i] = s > 0.0 ? std::min(1.0, boost::math::quantile(dist, u)) : target_median;
  }
  rng.shuffle(values);
  DetuningBins bins(bin_width);
  for (double v : values) bins.add(rng.uniform() * max_detuning, v);
  bins.finalize();
  return bins;
}

/// Uniform draw from the bin serving |detuning|.
inline double sample_edge_infidelity(const DetuningBins& bins, double detuning, CounterRng& rng) {
  const auto& bin = bins.bins()[bins.serving_bin(detuning)];
  return bin[static_cast<std::size_t>(rng.below(bin.size()))];
}

struct LinkNoiseConfig {
  double ratio = 4.17;  // e_link / e_chip

  void validate() const {
    if (!(ratio > 0.0) || !std::isfinite(ratio)) throw std::invalid_argument("link noise ratio must be > 0");
  }
};

/// Link edge infidelity: ratio * a fresh on-chip draw, clipped to 1. The
/// underlying draw depends only on (seed, edge), so changing the ratio scales
/// the same draws.
inline void assign_link_noise(DeviceInstance& d, const DetuningBins& bins, const LinkNoiseConfig& link,
                              std::uint64_t seed) {
  link.validate();
  const Topology& t = *d.topology;
  if (d.edge_infidelity.size() != t.edge_count()) d.edge_infidelity.resize(t.edge_count(), 0.0);
  for (std::size_t e = 0; e < t.edge_count(); ++e) {
    const Edge& edge = t.edge(e);
    if (!edge.is_link) continue;
    CounterRng rng(seed, {stream::kLink, e});
    d.edge_infidelity[e] = std::min(1.0, link.ratio * sample_edge_infidelity(bins, d.freq[edge.a] - d.freq[edge.b], rng));
  }
}

/// Assigns every edge: on-chip edges from their detuning bin, link edges as above.
inline DeviceInstance assign_device_noise(DeviceInstance d, const DetuningBins& bins, const LinkNoiseConfig& link,
                                          std::uint64_t seed) {
  if (!d.topology) throw std::invalid_argument("device has no topology");
  const Topology& t = *d.topology;
  if (d.freq.size() != t.qubit_count()) throw std::invalid_argument("device frequencies not sampled");
  d.edge_infidelity.assign(t.edge_count(), 0.0);
  for (std::size_t e = 0; e < t.edge_count(); ++e) {
    const Edge& edge = t.edge(e);
    if (edge.is_link) continue;
    CounterRng rng(seed, {stream::kNoise, e});
    d.edge_infidelity[e] = sample_edge_infidelity(bins, d.freq[edge.a] - d.freq[edge.b], rng);
  }
  assign_link_noise(d, bins, link, seed);
  return d;
}

/// Mean infidelity over coupled pairs.
inline double avg_infidelity(const DeviceInstance& d) {
  if (!d.topology || d.topology->edge_count() == 0) throw std::invalid_argument("avg_infidelity: device has no edges");
  if (!d.has_noise()) throw std::invalid_argument("avg_infidelity: noise not assigned");
  return mean_of(d.edge_infidelity);
}

/// Mean infidelity over on-chip edges only (the pre-assembly ranking metric).
inline double avg_on_chip_infidelity(const DeviceInstance& d) {
  if (!d.has_noise()) throw std::invalid_argument("avg_on_chip_infidelity: noise not assigned");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t e = 0; e < d.topology->edge_count(); ++e) {
    if (d.topology->edge(e).is_link) continue;
    sum += d.edge_infidelity[e];
    ++n;
  }
  if (n == 0) throw std::invalid_argument("avg_on_chip_infidelity: no on-chip edges");
  return sum / static_cast<double>(n);
}

}  // namespace chiplet
