#pragma once

/**
 * @file collision.hpp
 * @brief The seven fixed-frequency transmon collision criteria.
 *
 * Pair criteria (types 1-4) apply to each coupled control/target pair;
 * spectator criteria (types 5-7) apply to each unordered pair of neighbors of
 * a qubit that is the control of at least one incident edge.
 */

#include <cmath>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "chiplet/device.hpp"
#include "chiplet/hexlattice.hpp"

namespace chiplet {

/// Half-widths in GHz. Type 4 is a strict two-sided inequality with no width.
struct CollisionThresholds {
  double t1 = 0.017;
  double t2 = 0.004;
  double t3 = 0.030;
  double t5 = 0.017;
  double t6 = 0.025;
  double t7 = 0.017;

  void validate() const {
    const double all[] = {t1, t2, t3, t5, t6, t7};
    for (double v : all) {
      if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("collision thresholds must be positive");
    }
  }

  bool operator==(const CollisionThresholds&) const = default;
};

struct CollisionEvent {
  int type = 0;
  std::vector<QubitId> qubits;    // pair: control, target; spectator: control, j, k
  double detuning_value = 0.0;    // GHz, the quantity compared against the threshold
  std::optional<double> threshold;  // none for type 4

  bool operator==(const CollisionEvent&) const = default;
};

struct CollisionReport {
  std::vector<CollisionEvent> events;

  bool collision_free() const noexcept { return events.empty(); }
};

/// Boundary tolerance (1 Hz). Thresholds are closed intervals and type 4 is
/// open; frequencies given as decimal GHz values land on a boundary only up to
/// binary rounding, so comparisons are made with this slack.
inline constexpr double kBoundarySlack = 1e-9;

namespace detail {

inline bool hits(double d, double t) noexcept { return std::abs(d) <= t + kBoundarySlack; }

inline bool straddles(double fc, double ft, double alpha) noexcept {
  return fc + alpha + kBoundarySlack < ft && ft < fc - kBoundarySlack;
}

// Distance of x from y + shift on whichever side is closer, signed.
inline double closer_of(double a, double b) { return std::abs(a) <= std::abs(b) ? a : b; }

}  // namespace detail

/// Types 1-4 for a coupled pair. `control_is_i` picks the CR control.
inline std::vector<CollisionEvent> check_pair(double f_i, double f_j, bool control_is_i, double alpha,
                                              const CollisionThresholds& th) {
  std::vector<CollisionEvent> out;
  const double fc = control_is_i ? f_i : f_j;
  const double ft = control_is_i ? f_j : f_i;

  const double d1 = f_i - f_j;
  if (detail::hits(d1, th.t1)) out.push_back({1, {}, d1, th.t1});

  const double d2 = fc + alpha / 2.0 - ft;
  if (detail::hits(d2, th.t2)) out.push_back({2, {}, d2, th.t2});

  const double d3 = detail::closer_of(f_i - (f_j + alpha), f_j - (f_i + alpha));
  if (detail::hits(d3, th.t3)) out.push_back({3, {}, d3, th.t3});

  // Target must sit strictly inside the straddling regime (fc + alpha, fc).
  if (!detail::straddles(fc, ft, alpha)) out.push_back({4, {}, fc - ft, std::nullopt});
  return out;
}

/// Types 5-7 for control c with neighbors j and k.
inline std::vector<CollisionEvent> check_spectators(double f_c, double f_j, double f_k, double alpha,
                                                    const CollisionThresholds& th) {
  std::vector<CollisionEvent> out;
  const double d5 = f_j - f_k;
  if (detail::hits(d5, th.t5)) out.push_back({5, {}, d5, th.t5});

  const double d6 = detail::closer_of(f_j - (f_k + alpha), f_k - (f_j + alpha));
  if (detail::hits(d6, th.t6)) out.push_back({6, {}, d6, th.t6});

  const double d7 = 2.0 * f_c + alpha - (f_j + f_k);
  if (detail::hits(d7, th.t7)) out.push_back({7, {}, d7, th.t7});
  return out;
}

/// Where each criterion applies on a topology. Built once per topology.
struct CollisionSites {
  struct Pair {
    QubitId control;
    QubitId target;
  };
  struct Spectator {
    QubitId control;
    QubitId j;
    QubitId k;
  };

  std::vector<Pair> pairs;
  std::vector<Spectator> spectators;

  static CollisionSites of(const Topology& t) {
    CollisionSites s;
    std::vector<bool> is_control(t.qubit_count(), false);
    for (const Edge& e : t.edges()) {
      s.pairs.push_back({e.control, e.target()});
      is_control[e.control] = true;
    }
    for (QubitId c = 0; c < t.qubit_count(); ++c) {
      if (!is_control[c]) continue;
      const auto& nb = t.neighbors(c);
      for (std::size_t x = 0; x < nb.size(); ++x) {
        for (std::size_t y = x + 1; y < nb.size(); ++y) s.spectators.push_back({c, nb[x], nb[y]});
      }
    }
    return s;
  }
};

/// True when a control/target pair violates none of types 1-4. Uses the same
/// expressions as check_pair so results agree exactly at threshold boundaries.
inline bool pair_ok(double fc, double ft, double alpha, const CollisionThresholds& th) noexcept {
  using detail::hits;
  if (hits(fc - ft, th.t1)) return false;
  if (hits(fc + alpha / 2.0 - ft, th.t2)) return false;
  if (hits(fc - (ft + alpha), th.t3) || hits(ft - (fc + alpha), th.t3)) return false;
  return detail::straddles(fc, ft, alpha);
}

inline bool spectator_ok(double fc, double fj, double fk, double alpha, const CollisionThresholds& th) noexcept {
  using detail::hits;
  if (hits(fj - fk, th.t5)) return false;
  if (hits(fj - (fk + alpha), th.t6) || hits(fk - (fj + alpha), th.t6)) return false;
  return !hits(2.0 * fc + alpha - (fj + fk), th.t7);
}

/// Short-circuiting check used in the Monte Carlo hot loop; agrees with
/// check_device(...).collision_free().
inline bool collision_free(const CollisionSites& sites, std::span<const double> freq, double alpha,
                           const CollisionThresholds& th) noexcept {
  for (const auto& p : sites.pairs) {
    if (!pair_ok(freq[p.control], freq[p.target], alpha, th)) return false;
  }
  for (const auto& s : sites.spectators) {
    if (!spectator_ok(freq[s.control], freq[s.j], freq[s.k], alpha, th)) return false;
  }
  return true;
}

/// Every collision event on the device, pairs first (edge order), then spectators.
inline CollisionReport check_device(const Topology& t, std::span<const double> freq, double alpha,
                                    const CollisionThresholds& th) {
  for (QubitId q = 0; q < t.qubit_count(); ++q) {
    if (q >= freq.size() || !std::isfinite(freq[q])) {
      throw std::invalid_argument("missing frequency for qubit " + std::to_string(q));
    }
  }
  CollisionReport report;
  for (const Edge& e : t.edges()) {
    const QubitId tq = e.target();
    for (CollisionEvent ev : check_pair(freq[e.control], freq[tq], true, alpha, th)) {
      ev.qubits = {e.control, tq};
      report.events.push_back(std::move(ev));
    }
  }
  for (const auto& s : CollisionSites::of(t).spectators) {
    for (CollisionEvent ev : check_spectators(freq[s.control], freq[s.j], freq[s.k], alpha, th)) {
      ev.qubits = {s.control, s.j, s.k};
      report.events.push_back(std::move(ev));
    }
  }
  return report;
}

inline CollisionReport check_device(const DeviceInstance& d, double alpha, const CollisionThresholds& th) {
  if (!d.topology) throw std::invalid_argument("device has no topology");
  return check_device(*d.topology, d.freq, alpha, th);
}

/// One row per event: type,qubits,detuning_ghz,threshold_ghz
inline void write_collision_report_csv(const CollisionReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "type,qubits,detuning_ghz,threshold_ghz\n";
  out.precision(17);
  for (const auto& ev : r.events) {
    out << ev.type << ',';
    for (std::size_t i = 0; i < ev.qubits.size(); ++i) out << (i ? " " : "") << ev.qubits[i];
    out << ',' << ev.detuning_value << ',';
    if (ev.threshold) out << *ev.threshold;
    out << '\n';
  }
}

}  // namespace chiplet
