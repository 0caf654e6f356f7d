#pragma once

/**
 * @file bench.hpp
 * @brief Benchmark circuit generators, SWAP routing and fidelity products.
 *
 * Circuits contain only one- and two-qubit gates. Toffolis (adder) are
 * expanded into the standard 6-CX decomposition at generation time.
 *
 * Routing is intentionally simple and depends only on lattice coordinates, so
 * a monolithic device and an MCM with the same footprint get the same routed
 * circuit up to qubit relabeling:
 *  - initial layout: logical i -> i-th qubit of a boustrophedon path that
 *    runs along each dense row and drops to the next one through a connector
 *    (H*W + 1 qubits on an H x W heavy-hex block, so 80% utilization fits on
 *    it and chain circuits such as GHZ and TFIM need no SWAPs). Qubits off the
 *    path follow in depth-first preorder. Lattices without that row structure
 *    use the depth-first preorder alone;
 *  - a 2q gate on non-adjacent qubits moves its first operand along the
 *    shortest path whose coordinate sequence is lexicographically smallest,
 *    one SWAP (3 CX) per step, until the operands are adjacent.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chiplet/analysis.hpp"
#include "chiplet/device.hpp"
#include "chiplet/hexlattice.hpp"
#include "chiplet/rng.hpp"

namespace chiplet {

enum class BenchFamily : std::uint8_t { BV, QAOA, GHZ, Adder, Primacy, BitCode, TFIM };

inline constexpr std::array<BenchFamily, 7> kAllFamilies = {BenchFamily::BV,      BenchFamily::QAOA,
                                                           BenchFamily::GHZ,     BenchFamily::Adder,
                                                           BenchFamily::Primacy, BenchFamily::BitCode,
                                                           BenchFamily::TFIM};

inline const char* to_string(BenchFamily f) {
  switch (f) {
    case BenchFamily::BV: return "bv";
    case BenchFamily::QAOA: return "qaoa";
    case BenchFamily::GHZ: return "ghz";
    case BenchFamily::Adder: return "adder";
    case BenchFamily::Primacy: return "primacy";
    case BenchFamily::BitCode: return "bitcode";
    case BenchFamily::TFIM: return "tfim";
  }
  return "?";
}

inline BenchFamily bench_family_from_string(const std::string& s) {
  for (BenchFamily f : kAllFamilies) {
    if (s == to_string(f)) return f;
  }
  throw std::invalid_argument("unknown benchmark family '" + s + "' (expected bv, qaoa, ghz, adder, primacy, bitcode, tfim)");
}

/// Smallest logical qubit count each generator accepts.
inline std::uint32_t min_logical_qubits(BenchFamily f) {
  switch (f) {
    case BenchFamily::QAOA: return 4;
    case BenchFamily::Adder: return 4;
    case BenchFamily::BitCode: return 3;
    default: return 2;
  }
}

struct Gate {
  std::string op;
  std::uint32_t q0 = 0;
  std::uint32_t q1 = 0;
  bool two_qubit = false;
  bool has_param = false;
  double param = 0.0;

  bool operator==(const Gate&) const = default;
};

struct Circuit {
  BenchFamily family = BenchFamily::GHZ;
  std::uint32_t logical_qubits = 0;
  std::uint64_t seed = 0;
  std::vector<Gate> gates;

  std::size_t two_qubit_count() const {
    return static_cast<std::size_t>(std::count_if(gates.begin(), gates.end(), [](const Gate& g) { return g.two_qubit; }));
  }
  std::size_t one_qubit_count() const { return gates.size() - two_qubit_count(); }

  void add1(const char* op, std::uint32_t q) { gates.push_back({op, q, 0, false, false, 0.0}); }
  void add1(const char* op, std::uint32_t q, double param) { gates.push_back({op, q, 0, false, true, param}); }
  void add2(const char* op, std::uint32_t a, std::uint32_t b) { gates.push_back({op, a, b, true, false, 0.0}); }

  /// Throws if an operand is out of range or a 2q gate repeats a qubit.
  void validate() const {
    for (const Gate& g : gates) {
      if (g.q0 >= logical_qubits || (g.two_qubit && g.q1 >= logical_qubits)) {
        throw std::invalid_argument("circuit gate '" + g.op + "' has an operand out of range");
      }
      if (g.two_qubit && g.q0 == g.q1) throw std::invalid_argument("circuit gate '" + g.op + "' repeats a qubit");
    }
  }
};

namespace detail {

inline void toffoli(Circuit& c, std::uint32_t a, std::uint32_t b, std::uint32_t t) {
  c.add1("h", t);
  c.add2("cx", b, t);
  c.add1("tdg", t);
  c.add2("cx", a, t);
  c.add1("t", t);
  c.add2("cx", b, t);
  c.add1("tdg", t);
  c.add2("cx", a, t);
  c.add1("t", b);
  c.add1("t", t);
  c.add1("h", t);
  c.add2("cx", a, b);
  c.add1("t", a);
  c.add1("tdg", b);
  c.add2("cx", a, b);
}

inline void maj(Circuit& c, std::uint32_t x, std::uint32_t y, std::uint32_t z) {
  c.add2("cx", z, y);
  c.add2("cx", z, x);
  toffoli(c, x, y, z);
}

inline void uma(Circuit& c, std::uint32_t x, std::uint32_t y, std::uint32_t z) {
  toffoli(c, x, y, z);
  c.add2("cx", z, x);
  c.add2("cx", x, y);
}

/// Random 3-regular simple graph on n (even, >= 4) vertices: pairing model with restarts.
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> random_cubic_graph(std::uint32_t n, CounterRng& rng) {
  for (int restart = 0; restart < 10000; ++restart) {
    std::vector<std::uint32_t> points;
    for (std::uint32_t v = 0; v < n; ++v) points.insert(points.end(), 3, v);
    rng.shuffle(points);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    bool simple = true;
    for (std::size_t i = 0; i < points.size() && simple; i += 2) {
      auto e = std::minmax(points[i], points[i + 1]);
      if (e.first == e.second) simple = false;
      for (const auto& f : edges) simple = simple && f != std::pair(e.first, e.second);
      edges.emplace_back(e.first, e.second);
    }
    if (simple) {
      std::sort(edges.begin(), edges.end());
      return edges;
    }
  }
  throw std::runtime_error("failed to sample a 3-regular graph");
}

}  // namespace detail

/// Seeded BV hidden string over n-1 bits, each set with probability 1/2.
inline std::vector<bool> bv_hidden_string(std::uint32_t n, std::uint64_t seed) {
  CounterRng rng(seed, {stream::kCircuit, static_cast<std::uint64_t>(BenchFamily::BV), n});
  std::vector<bool> s(n - 1);
  for (std::uint32_t i = 0; i + 1 < n; ++i) s[i] = rng.next_u64() >> 63;
  return s;
}

/**
 * Deterministic circuit for (family, n, seed).
 *  bv      hidden string on qubits 0..n-2, oracle target n-1; one CX per set bit
 *  qaoa    p=1 MaxCut on a random 3-regular graph over the even part of n
 *          (odd n leaves the last qubit idle); ZZ = CX, RZ, CX
 *  ghz     H then a CX chain: n-1 CX
 *  adder   Cuccaro ripple-carry on floor((n-2)/2)-bit operands
 *  primacy 10 layers of random {sx, sy, sw} plus CZ on a random perfect matching
 *  bitcode data on even qubits, ancillas on odd ones; 2 CX per ancilla
 *  tfim    one first-order Trotter step of a 1D chain: 2(n-1) CX
 */
inline Circuit generate_circuit(BenchFamily family, std::uint32_t n, std::uint64_t seed) {
  if (n < min_logical_qubits(family)) {
    throw std::invalid_argument(std::string(to_string(family)) + " needs at least " +
                                std::to_string(min_logical_qubits(family)) + " qubits, got " + std::to_string(n));
  }
  Circuit c;
  c.family = family;
  c.logical_qubits = n;
  c.seed = seed;
  CounterRng rng(seed, {stream::kCircuit, static_cast<std::uint64_t>(family), n});

  switch (family) {
    case BenchFamily::BV: {
      const auto s = bv_hidden_string(n, seed);
      const std::uint32_t anc = n - 1;
      c.add1("x", anc);
      for (std::uint32_t q = 0; q < n; ++q) c.add1("h", q);
      for (std::uint32_t q = 0; q < anc; ++q) {
        if (s[q]) c.add2("cx", q, anc);
      }
      for (std::uint32_t q = 0; q < anc; ++q) c.add1("h", q);
      break;
    }
    case BenchFamily::QAOA: {
      const std::uint32_t active = n - n % 2;
      const double gamma = 0.7;
      const double beta = 0.3;
      for (std::uint32_t q = 0; q < active; ++q) c.add1("h", q);
      for (const auto& [a, b] : detail::random_cubic_graph(active, rng)) {
        c.add2("cx", a, b);
        c.add1("rz", b, gamma);
        c.add2("cx", a, b);
      }
      for (std::uint32_t q = 0; q < active; ++q) c.add1("rx", q, 2.0 * beta);
      break;
    }
    case BenchFamily::GHZ: {
      c.add1("h", 0);
      for (std::uint32_t q = 0; q + 1 < n; ++q) c.add2("cx", q, q + 1);
      break;
    }
    case BenchFamily::Adder: {
      // Qubit 0 carry-in, then (b_i, a_i) pairs, then carry-out.
      const std::uint32_t bits = (n - 2) / 2;
      auto b = [](std::uint32_t i) { return 1 + 2 * i; };
      auto a = [](std::uint32_t i) { return 2 + 2 * i; };
      const std::uint32_t cout = 2 * bits + 1;
      detail::maj(c, 0, b(0), a(0));
      for (std::uint32_t i = 1; i < bits; ++i) detail::maj(c, a(i - 1), b(i), a(i));
      c.add2("cx", a(bits - 1), cout);
      for (std::uint32_t i = bits - 1; i >= 1; --i) detail::uma(c, a(i - 1), b(i), a(i));
      detail::uma(c, 0, b(0), a(0));
      break;
    }
    case BenchFamily::Primacy: {
      static const char* kOneQubit[] = {"sx", "sy", "sw"};
      std::vector<std::uint32_t> order(n);
      for (int layer = 0; layer < 10; ++layer) {
        for (std::uint32_t q = 0; q < n; ++q) c.add1(kOneQubit[rng.below(3)], q);
        std::iota(order.begin(), order.end(), 0u);
        rng.shuffle(order);
        for (std::uint32_t i = 0; i + 1 < n; i += 2) c.add2("cz", order[i], order[i + 1]);
      }
      break;
    }
    case BenchFamily::BitCode: {
      const std::uint32_t ancillas = (n - 1) / 2;
      for (std::uint32_t i = 0; i < ancillas; ++i) {
        c.add2("cx", 2 * i, 2 * i + 1);
        c.add2("cx", 2 * i + 2, 2 * i + 1);
      }
      break;
    }
    case BenchFamily::TFIM: {
      const double dt = 0.1;
      for (std::uint32_t q = 0; q + 1 < n; ++q) {
        c.add2("cx", q, q + 1);
        c.add1("rz", q + 1, 2.0 * dt);
        c.add2("cx", q, q + 1);
      }
      for (std::uint32_t q = 0; q < n; ++q) c.add1("rx", q, 2.0 * dt);
      break;
    }
  }
  return c;
}

/// Logical qubits used on a device of `physical` qubits (80% utilization).
inline std::uint32_t logical_qubits_for(std::size_t physical) {
  return static_cast<std::uint32_t>(physical * 4 / 5);
}

struct RoutedCircuit {
  std::vector<QubitId> initial_layout;  // logical -> physical
  std::vector<QubitId> final_layout;
  std::vector<Gate> physical_gates;     // SWAPs expanded to 3 CX
  std::vector<std::size_t> gate_edges;  // edge id per physical 2q gate, in order
  std::size_t two_qubit_count = 0;
  std::size_t one_qubit_count = 0;
  std::size_t swap_count = 0;
  std::size_t critical_path_2q = 0;
};

/// All-pairs hop distances plus the deterministic orderings used by routing.
class Router {
 public:
  explicit Router(std::shared_ptr<const Topology> t) : t_(std::move(t)) {
    if (!t_) throw std::invalid_argument("router needs a topology");
    const std::size_t n = t_->qubit_count();
    sorted_neighbors_.resize(n);
    for (QubitId q = 0; q < n; ++q) {
      sorted_neighbors_[q] = t_->neighbors(q);
      std::sort(sorted_neighbors_[q].begin(), sorted_neighbors_[q].end(),
                [&](QubitId x, QubitId y) { return coord_less(x, y); });
    }
    dist_.assign(n * n, kUnreachable);
    for (QubitId s = 0; s < n; ++s) {
      std::queue<QubitId> frontier;
      dist_[s * n + s] = 0;
      frontier.push(s);
      while (!frontier.empty()) {
        const QubitId u = frontier.front();
        frontier.pop();
        for (QubitId v : t_->neighbors(u)) {
          if (dist_[s * n + v] == kUnreachable) {
            dist_[s * n + v] = dist_[s * n + u] + 1;
            frontier.push(v);
          }
        }
      }
    }
  }

  const Topology& topology() const noexcept { return *t_; }

  std::uint32_t distance(QubitId a, QubitId b) const { return dist_[a * t_->qubit_count() + b]; }

  /// Depth-first preorder from the qubit with the smallest (row, col),
  /// neighbors taken in (row, col) order.
  std::vector<QubitId> dfs_order() const {
    const std::size_t n = t_->qubit_count();
    std::vector<QubitId> order;
    if (n == 0) return order;
    QubitId start = 0;
    for (QubitId q = 1; q < n; ++q) {
      if (coord_less(q, start)) start = q;
    }
    std::vector<bool> seen(n, false);
    std::vector<QubitId> stack{start};
    while (!stack.empty()) {
      const QubitId u = stack.back();
      stack.pop_back();
      if (seen[u]) continue;
      seen[u] = true;
      order.push_back(u);
      const auto& nb = sorted_neighbors_[u];
      for (auto it = nb.rbegin(); it != nb.rend(); ++it) {
        if (!seen[*it]) stack.push_back(*it);
      }
    }
    return order;
  }

  /// Initial layout order: the row-snake path, then the remaining qubits in
  /// depth-first preorder. Falls back to the preorder alone when the lattice
  /// has no snake.
  std::vector<QubitId> layout_order() const {
    std::vector<QubitId> order = snake_path();
    if (order.empty()) return dfs_order();
    std::vector<bool> on_path(t_->qubit_count(), false);
    for (QubitId q : order) on_path[q] = true;
    for (QubitId q : dfs_order()) {
      if (!on_path[q]) order.push_back(q);
    }
    return order;
  }

  /// Path along every dense (even) display row, alternating direction, joined
  /// by one connector between consecutive rows. Each row is walked from its
  /// entry to the exit connector farthest away (ties to the smaller column);
  /// the first row starts at the end opposite its exit and the last row runs
  /// to its far end. Empty if any step is not an edge.
  std::vector<QubitId> snake_path() const {
    std::map<int, std::map<int, QubitId>> rows;  // display row -> col -> qubit
    for (QubitId q = 0; q < t_->qubit_count(); ++q) {
      const LatticeCoord c = t_->coord_of(q);
      rows[c.row][c.col] = q;
    }
    std::vector<int> dense;
    for (const auto& [r, cols] : rows) {
      if (r % 2 == 0) dense.push_back(r);
    }
    if (dense.empty() || dense.front() != 0) return {};
    for (std::size_t i = 0; i + 1 < dense.size(); ++i) {
      if (dense[i + 1] != dense[i] + 2) return {};
    }

    std::vector<QubitId> path;
    auto walk = [&](int r, int from, int to) {
      const int dir = to >= from ? 1 : -1;
      for (int c = from;; c += dir) {
        const auto it = rows[r].find(c);
        if (it == rows[r].end()) return false;
        if (!path.empty() && !t_->find_edge(path.back(), it->second)) return false;
        path.push_back(it->second);
        if (c == to) return true;
      }
    };
    int entry = 0;
    for (std::size_t i = 0; i < dense.size(); ++i) {
      const int r = dense[i];
      const int lo = rows[r].begin()->first;
      const int hi = rows[r].rbegin()->first;
      const bool first = i == 0;
      const bool last = i + 1 == dense.size();
      if (last) {
        if (first) entry = lo;
        if (!walk(r, entry, hi - entry >= entry - lo ? hi : lo)) return {};
        break;
      }
      // Exit through the connector below that maximizes the row segment.
      int best = -1, best_len = -1;
      for (const auto& [c, q] : rows[r + 1]) {
        if (!rows[r].count(c) || !rows[r + 2].count(c)) continue;
        const int len = first ? std::max(c - lo, hi - c) : std::abs(c - entry);
        if (len > best_len) best = c, best_len = len;
      }
      if (best < 0) return {};
      if (first) entry = hi - best >= best - lo ? hi : lo;
      if (!walk(r, entry, best)) return {};
      const QubitId connector = rows[r + 1][best];
      if (!t_->find_edge(path.back(), connector)) return {};
      path.push_back(connector);
      entry = best;
      if (!t_->find_edge(connector, rows[r + 2][best])) return {};
      // The next row's walk starts with the qubit under the connector.
    }
    return path;
  }

  /// Shortest path from a to b with the lexicographically smallest coordinate sequence.
  std::vector<QubitId> shortest_path(QubitId a, QubitId b) const {
    if (distance(a, b) == kUnreachable) throw std::runtime_error("routing: qubits are disconnected");
    std::vector<QubitId> path{a};
    QubitId cur = a;
    while (cur != b) {
      const std::uint32_t d = distance(cur, b);
      for (QubitId v : sorted_neighbors_[cur]) {
        if (distance(v, b) + 1 == d) {
          cur = v;
          break;
        }
      }
      path.push_back(cur);
    }
    return path;
  }

 private:
  static constexpr std::uint32_t kUnreachable = std::numeric_limits<std::uint32_t>::max();

  bool coord_less(QubitId x, QubitId y) const {
    const LatticeCoord a = t_->coord_of(x);
    const LatticeCoord b = t_->coord_of(y);
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  }

  std::shared_ptr<const Topology> t_;
  std::vector<std::vector<QubitId>> sorted_neighbors_;
  std::vector<std::uint32_t> dist_;
};

inline RoutedCircuit route_circuit(const Circuit& c, const Router& router) {
  const Topology& t = router.topology();
  c.validate();
  if (static_cast<std::size_t>(c.logical_qubits) > logical_qubits_for(t.qubit_count())) {
    throw std::invalid_argument("circuit needs " + std::to_string(c.logical_qubits) + " qubits but a " +
                                std::to_string(t.qubit_count()) + "-qubit device allows " +
                                std::to_string(logical_qubits_for(t.qubit_count())) + " (80% utilization)");
  }
  const std::size_t n = t.qubit_count();
  const auto order = router.layout_order();
  if (order.size() != n) throw std::invalid_argument("routing needs a connected topology");

  RoutedCircuit rc;
  rc.initial_layout.assign(order.begin(), order.begin() + c.logical_qubits);
  std::vector<QubitId> phys_of(order.begin(), order.end());  // slot per logical, extended to all physical
  std::vector<std::uint32_t> logical_at(n);
  for (std::uint32_t i = 0; i < n; ++i) logical_at[phys_of[i]] = i;
  std::vector<std::size_t> level(n, 0);

  auto emit2 = [&](const char* op, QubitId a, QubitId b) {
    const auto e = t.find_edge(a, b);
    if (!e) throw std::logic_error("routing emitted a gate on a non-edge");
    rc.physical_gates.push_back({op, a, b, true, false, 0.0});
    rc.gate_edges.push_back(*e);
    const std::size_t l = std::max(level[a], level[b]) + 1;
    level[a] = level[b] = l;
    rc.critical_path_2q = std::max(rc.critical_path_2q, l);
  };

  for (const Gate& g : c.gates) {
    if (!g.two_qubit) {
      Gate pg = g;
      pg.q0 = phys_of[g.q0];
      rc.physical_gates.push_back(pg);
      ++rc.one_qubit_count;
      continue;
    }
    QubitId pa = phys_of[g.q0];
    const QubitId pb = phys_of[g.q1];
    if (router.distance(pa, pb) > 1) {
      const auto path = router.shortest_path(pa, pb);
      for (std::size_t i = 0; i + 2 < path.size(); ++i) {
        const QubitId x = path[i];
        const QubitId y = path[i + 1];
        emit2("cx", x, y);
        emit2("cx", y, x);
        emit2("cx", x, y);
        ++rc.swap_count;
        std::swap(logical_at[x], logical_at[y]);
        phys_of[logical_at[x]] = x;
        phys_of[logical_at[y]] = y;
      }
      pa = phys_of[g.q0];
    }
    emit2(g.op.c_str(), pa, pb);
  }
  rc.two_qubit_count = rc.gate_edges.size();
  rc.final_layout.assign(phys_of.begin(), phys_of.begin() + c.logical_qubits);
  return rc;
}

inline RoutedCircuit route_circuit(const Circuit& c, const DeviceInstance& d) {
  return route_circuit(c, Router(d.topology));
}

/// log of the product of (1 - e) over the routed 2q gates.
inline double log_fidelity_product(const RoutedCircuit& rc, const DeviceInstance& d) {
  if (!d.has_noise()) throw std::invalid_argument("fidelity product needs assigned noise");
  double lf = 0.0;
  for (std::size_t e : rc.gate_edges) {
    if (e >= d.edge_infidelity.size()) throw std::invalid_argument("routed gate references a missing edge");
    lf += std::log1p(-d.edge_infidelity[e]);
  }
  return lf;
}

inline double fidelity_product(const RoutedCircuit& rc, const DeviceInstance& d) {
  return std::exp(log_fidelity_product(rc, d));
}

/// log of the mean of exp(x_i), stable for very negative x.
inline double log_mean_exp(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("log_mean_exp: empty input");
  const double hi = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - hi);
  return hi + std::log(s / static_cast<double>(xs.size()));
}

struct BenchComparison {
  BenchFamily family = BenchFamily::GHZ;
  McmSpec spec;
  double link_ratio = 0.0;
  bool feasible = false;
  double ratio = 0.0;  // mean F_MCM / mean F_mono
  std::uint32_t logical_qubits = 0;
  std::size_t pre_routing_2q = 0;
  std::size_t mono_routed_2q = 0;
  std::size_t mcm_routed_2q = 0;
  std::size_t mcm_count = 0;
  std::size_t mono_count = 0;
};

/// Mean fidelity product over assembled MCMs (links at `link_ratio`) divided by
/// the mean over collision-free monolithic devices.
inline BenchComparison compare_architectures(BenchFamily family, const PairedPopulation& pop, const DetuningBins& bins,
                                             double link_ratio, std::uint64_t circuit_seed) {
  BenchComparison out;
  out.family = family;
  out.spec = pop.spec;
  out.link_ratio = link_ratio;
  out.mono_count = pop.mono.size();
  out.mcm_count = pop.assembly.mcms.size();
  out.logical_qubits = logical_qubits_for(pop.mono_topology->qubit_count());
  const Circuit c = generate_circuit(family, out.logical_qubits, circuit_seed);
  out.pre_routing_2q = c.two_qubit_count();
  out.feasible = pop.feasible() && !pop.assembly.mcms.empty();
  if (!out.feasible) return out;

  const RoutedCircuit mono_rc = route_circuit(c, Router(pop.mono_topology));
  const RoutedCircuit mcm_rc = route_circuit(c, Router(pop.layout->topology));
  out.mono_routed_2q = mono_rc.two_qubit_count;
  out.mcm_routed_2q = mcm_rc.two_qubit_count;

  std::vector<double> mono_lf, mcm_lf;
  for (const auto& d : pop.mono) mono_lf.push_back(log_fidelity_product(mono_rc, d));
  for (const auto& d : mcms_with_link_noise(pop, bins, link_ratio)) mcm_lf.push_back(log_fidelity_product(mcm_rc, d));
  out.ratio = std::exp(log_mean_exp(mcm_lf) - log_mean_exp(mono_lf));
  return out;
}

}  // namespace chiplet
