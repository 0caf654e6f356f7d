#pragma once

/**
 * @file hexlattice.hpp
 * @brief Heavy-hex topologies with the three-frequency allocation pattern.
 *
 * All generated lattices share one periodic layout:
 *
 *  - Dense rows r = 0..H-1 are paths of W qubits. Odd columns are F2; even
 *    column c is F0 when (c/2 + r) is even and F1 otherwise.
 *  - Between dense rows r and r+1 sit F2 connector qubits joining column c of
 *    both rows, at c = 0 (mod 4) when r is even and c = 2 (mod 4) when r is
 *    odd (the brick offset of the heavy-hex lattice).
 *  - The last dense row also carries connectors with nothing below them; these
 *    are the bottom link stubs. The right-most qubit of every dense row is F2
 *    (W is a multiple of 4) and is the right link stub.
 *
 * Every edge therefore joins one F2 qubit to one F0/F1 qubit, and the F2 end
 * is the cross-resonance control. A block of H x W with H even and W a
 * multiple of 4 tiles the plane, so a k x m grid of chiplets is the same graph
 * as a single lattice of kH x mW.
 *
 * Qubit ids are row-major over display rows (dense row r is display row 2r,
 * its connector row is 2r+1). Stitched MCMs number qubits chiplet-major.
 */

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace chiplet {

using QubitId = std::uint32_t;

enum class FrequencyClass : std::uint8_t { F0 = 0, F1 = 1, F2 = 2 };

inline const char* to_string(FrequencyClass c) {
  switch (c) {
    case FrequencyClass::F0: return "F0";
    case FrequencyClass::F1: return "F1";
    case FrequencyClass::F2: return "F2";
  }
  return "?";
}

inline FrequencyClass frequency_class_from_string(const std::string& s) {
  if (s == "F0") return FrequencyClass::F0;
  if (s == "F1") return FrequencyClass::F1;
  if (s == "F2") return FrequencyClass::F2;
  throw std::invalid_argument("unknown frequency class '" + s + "'");
}

/// Layout bookkeeping only: display row and column in the global lattice.
struct LatticeCoord {
  int row = 0;
  int col = 0;

  auto operator<=>(const LatticeCoord&) const = default;
};

struct Edge {
  QubitId a = 0;
  QubitId b = 0;
  QubitId control = 0;
  bool is_link = false;

  QubitId target() const noexcept { return control == a ? b : a; }
};

enum class StubSide : std::uint8_t { Right, Bottom };

/// An F2 qubit on the right or bottom boundary that can host an inter-chip link.
struct LinkStub {
  QubitId qubit = 0;
  StubSide side = StubSide::Right;
  /// Dense row (right stubs) or column (bottom stubs) of the partner qubit.
  int index = 0;
};

class Topology {
 public:
  QubitId add_qubit(FrequencyClass cls, std::uint32_t chiplet = 0, LatticeCoord coord = {}) {
    const auto id = static_cast<QubitId>(classes_.size());
    classes_.push_back(cls);
    chiplet_of_.push_back(chiplet);
    coords_.push_back(coord);
    adjacency_.emplace_back();
    chiplet_count_ = std::max(chiplet_count_, chiplet + 1);
    return id;
  }

  /// Adds an edge whose control is the F2 endpoint (the higher class if the
  /// pattern is broken, `a` on a tie).
  std::size_t add_edge(QubitId a, QubitId b, bool is_link = false) {
    check_qubit(a);
    check_qubit(b);
    const QubitId control = class_of(b) > class_of(a) ? b : a;
    return add_edge(a, b, control, is_link);
  }

  std::size_t add_edge(QubitId a, QubitId b, QubitId control, bool is_link) {
    check_qubit(a);
    check_qubit(b);
    if (a == b) throw std::invalid_argument("self-loop on qubit " + std::to_string(a));
    if (control != a && control != b) throw std::invalid_argument("edge control must be an endpoint");
    if (find_edge(a, b)) {
      throw std::invalid_argument("duplicate edge " + std::to_string(a) + "-" + std::to_string(b));
    }
    const std::size_t index = edges_.size();
    edges_.push_back(Edge{a, b, control, is_link});
    edge_index_.emplace(pair_key(a, b), index);
    insert_sorted(adjacency_[a], b);
    insert_sorted(adjacency_[b], a);
    return index;
  }

  std::size_t qubit_count() const noexcept { return classes_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  std::uint32_t chiplet_count() const noexcept { return chiplet_count_; }

  FrequencyClass class_of(QubitId q) const { return classes_.at(q); }
  std::uint32_t chiplet_of(QubitId q) const { return chiplet_of_.at(q); }
  LatticeCoord coord_of(QubitId q) const { return coords_.at(q); }

  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const Edge& edge(std::size_t i) const { return edges_.at(i); }
  const std::vector<QubitId>& neighbors(QubitId q) const { return adjacency_.at(q); }
  std::size_t degree(QubitId q) const { return adjacency_.at(q).size(); }

  std::optional<std::size_t> find_edge(QubitId a, QubitId b) const {
    const auto it = edge_index_.find(pair_key(a, b));
    if (it == edge_index_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<std::size_t> link_edges() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      if (edges_[i].is_link) out.push_back(i);
    }
    return out;
  }

  /// Sorted ids of qubits incident to at least one link edge.
  std::vector<QubitId> link_qubits() const {
    std::vector<QubitId> out;
    for (const Edge& e : edges_) {
      if (e.is_link) {
        out.push_back(e.a);
        out.push_back(e.b);
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  const std::vector<LinkStub>& stubs() const noexcept { return stubs_; }
  void add_stub(LinkStub stub) { stubs_.push_back(stub); }

  /// Copy with every link edge turned into an ordinary on-chip edge and all
  /// qubits moved to chiplet 0.
  Topology without_link_markings() const {
    Topology t = *this;
    std::fill(t.chiplet_of_.begin(), t.chiplet_of_.end(), 0u);
    for (Edge& e : t.edges_) e.is_link = false;
    t.chiplet_count_ = t.classes_.empty() ? 0 : 1;
    return t;
  }

  bool is_connected() const {
    if (qubit_count() == 0) return true;
    std::vector<bool> seen(qubit_count(), false);
    std::queue<QubitId> frontier;
    frontier.push(0);
    seen[0] = true;
    std::size_t visited = 1;
    while (!frontier.empty()) {
      const QubitId q = frontier.front();
      frontier.pop();
      for (QubitId n : adjacency_[q]) {
        if (!seen[n]) {
          seen[n] = true;
          ++visited;
          frontier.push(n);
        }
      }
    }
    return visited == qubit_count();
  }

 private:
  static std::uint64_t pair_key(QubitId a, QubitId b) noexcept {
    if (a > b) std::swap(a, b);
    return (std::uint64_t{a} << 32) | b;
  }

  static void insert_sorted(std::vector<QubitId>& v, QubitId q) {
    v.insert(std::upper_bound(v.begin(), v.end(), q), q);
  }

  void check_qubit(QubitId q) const {
    if (q >= qubit_count()) throw std::out_of_range("unknown qubit " + std::to_string(q));
  }

  std::vector<FrequencyClass> classes_;
  std::vector<std::uint32_t> chiplet_of_;
  std::vector<LatticeCoord> coords_;
  std::vector<Edge> edges_;
  std::vector<std::vector<QubitId>> adjacency_;
  std::unordered_map<std::uint64_t, std::size_t> edge_index_;
  std::vector<LinkStub> stubs_;
  std::uint32_t chiplet_count_ = 0;
};

// ---------------------------------------------------------------------------
// Chiplet and MCM specifications

inline constexpr std::array<int, 9> kSupportedChipletSizes = {10, 20, 40, 60, 90, 120, 160, 200, 250};
inline constexpr int kDefaultQubitCap = 500;

inline std::string supported_sizes_text() {
  std::ostringstream os;
  for (std::size_t i = 0; i < kSupportedChipletSizes.size(); ++i) {
    os << (i ? ", " : "") << kSupportedChipletSizes[i];
  }
  return os.str();
}

/// A chiplet is one H x W lattice block; size = H*W + H*W/4.
struct ChipletSpec {
  int size = 20;
  int dense_rows = 2;
  int row_length = 8;

  /// Looks up the layout for a supported size.
  static ChipletSpec of(int size) {
    // size -> (dense rows, dense-row length)
    static constexpr std::array<std::array<int, 3>, 9> kTable = {{
        {10, 2, 4},
        {20, 2, 8},
        {40, 4, 8},
        {60, 4, 12},
        {90, 6, 12},
        {120, 6, 16},
        {160, 8, 16},
        {200, 8, 20},
        {250, 10, 20},
    }};
    for (const auto& row : kTable) {
      if (row[0] == size) return ChipletSpec{row[0], row[1], row[2]};
    }
    throw std::invalid_argument("unsupported chiplet size " + std::to_string(size) +
                                "; supported sizes are " + supported_sizes_text());
  }

  bool operator==(const ChipletSpec&) const = default;
};

struct McmSpec {
  ChipletSpec chiplet;
  int rows = 1;  // k
  int cols = 1;  // m

  int chiplet_count() const noexcept { return rows * cols; }
  int qubit_count() const noexcept { return rows * cols * chiplet.size; }
  std::string dims() const { return std::to_string(rows) + "x" + std::to_string(cols); }

  void validate(int qubit_cap = kDefaultQubitCap) const {
    (void)ChipletSpec::of(chiplet.size);
    if (rows < 1 || cols < 1) throw std::invalid_argument("MCM dimensions must be at least 1x1");
    if (qubit_cap > 0 && qubit_count() > qubit_cap) {
      throw std::invalid_argument("MCM " + dims() + " of " + std::to_string(chiplet.size) + "-qubit chiplets has " +
                                  std::to_string(qubit_count()) + " qubits, above the cap of " +
                                  std::to_string(qubit_cap));
    }
  }

  bool operator==(const McmSpec&) const = default;
};

/// Parses "KxM".
inline std::pair<int, int> parse_dims(const std::string& text) {
  const auto x = text.find_first_of("xX");
  if (x == std::string::npos) throw std::invalid_argument("dims '" + text + "' must look like KxM");
  try {
    std::size_t used_k = 0, used_m = 0;
    const int k = std::stoi(text.substr(0, x), &used_k);
    const int m = std::stoi(text.substr(x + 1), &used_m);
    if (used_k != x || used_m != text.size() - x - 1 || k < 1 || m < 1) throw std::invalid_argument("");
    return {k, m};
  } catch (const std::exception&) {
    throw std::invalid_argument("dims '" + text + "' must look like KxM with positive integers");
  }
}

// ---------------------------------------------------------------------------
// Generators

namespace detail {

inline FrequencyClass dense_class(int row, int col) {
  if (col % 2 == 1) return FrequencyClass::F2;
  return ((col / 2 + row) % 2 == 0) ? FrequencyClass::F0 : FrequencyClass::F1;
}

/// Columns carrying a connector below dense row `row`.
inline bool has_connector_below(int row, int col) { return col % 4 == ((row % 2 == 0) ? 0 : 2); }

}  // namespace detail

/// Builds a single H x W heavy-hex block (dense rows, connectors, bottom stubs).
inline Topology build_lattice(int dense_rows, int row_length, int row_offset = 0, int col_offset = 0) {
  if (dense_rows < 2 || dense_rows % 2 != 0) throw std::invalid_argument("dense row count must be even and >= 2");
  if (row_length < 4 || row_length % 4 != 0) throw std::invalid_argument("dense row length must be a multiple of 4");

  Topology t;
  std::vector<std::vector<QubitId>> dense(dense_rows, std::vector<QubitId>(row_length));
  std::vector<std::vector<std::pair<int, QubitId>>> connectors(dense_rows);

  for (int r = 0; r < dense_rows; ++r) {
    for (int c = 0; c < row_length; ++c) {
      dense[r][c] = t.add_qubit(detail::dense_class(r, c), 0, {2 * (r + row_offset), c + col_offset});
    }
    for (int c = 0; c < row_length; ++c) {
      if (detail::has_connector_below(r, c)) {
        connectors[r].emplace_back(c, t.add_qubit(FrequencyClass::F2, 0, {2 * (r + row_offset) + 1, c + col_offset}));
      }
    }
  }
  for (int r = 0; r < dense_rows; ++r) {
    for (int c = 0; c + 1 < row_length; ++c) t.add_edge(dense[r][c], dense[r][c + 1]);
    for (const auto& [c, q] : connectors[r]) {
      t.add_edge(q, dense[r][c]);
      if (r + 1 < dense_rows) {
        t.add_edge(q, dense[r + 1][c]);
      } else {
        t.add_stub({q, StubSide::Bottom, c});
      }
    }
    t.add_stub({dense[r][row_length - 1], StubSide::Right, r});
  }
  return t;
}

/// A standalone chiplet: chiplet index 0, no link edges, stubs recorded.
inline Topology build_chiplet(const ChipletSpec& spec) {
  const ChipletSpec s = ChipletSpec::of(spec.size);
  return build_lattice(s.dense_rows, s.row_length);
}

/// Monolithic device with the footprint of a k x m grid of chiplets.
inline Topology build_monolithic(const McmSpec& spec, int qubit_cap = 0) {
  spec.validate(qubit_cap);
  const ChipletSpec s = ChipletSpec::of(spec.chiplet.size);
  return build_lattice(s.dense_rows * spec.rows, s.row_length * spec.cols);
}

/// Qubit counts a monolithic device can have: any k*m*c for a supported c.
inline bool is_expressible(int total_qubits) {
  if (total_qubits <= 0) return false;
  for (int c : kSupportedChipletSizes) {
    if (total_qubits % c == 0) return true;
  }
  return false;
}

/**
 * Picks the tiling used for a monolithic device of `total_qubits`: among
 * supported tile sizes dividing the total and factorizations k x m (k <= m),
 * the most square grid wins; ties go to the larger tile.
 * 100 -> 2x5 of 10-qubit tiles, 180 -> 3x3 of 20-qubit tiles.
 */
inline McmSpec monolithic_layout_for(int total_qubits) {
  if (!is_expressible(total_qubits)) {
    int below = total_qubits - 1;
    while (below > 0 && !is_expressible(below)) --below;
    int above = std::max(total_qubits + 1, 1);
    while (!is_expressible(above)) ++above;
    std::string msg = "qubit count " + std::to_string(total_qubits) + " is not expressible by the tiling; nearest: ";
    if (below > 0) msg += std::to_string(below) + ", ";
    msg += std::to_string(above);
    throw std::invalid_argument(msg);
  }
  std::optional<McmSpec> best;
  double best_aspect = 0.0;
  for (int c : kSupportedChipletSizes) {
    if (total_qubits % c != 0) continue;
    const int n = total_qubits / c;
    for (int k = 1; k * k <= n; ++k) {
      if (n % k != 0) continue;
      const int m = n / k;
      const double aspect = static_cast<double>(m) / k;
      if (!best || aspect < best_aspect || (aspect == best_aspect && c > best->chiplet.size)) {
        best = McmSpec{ChipletSpec::of(c), k, m};
        best_aspect = aspect;
      }
    }
  }
  return *best;
}

/**
 * Places k*m copies of the chiplet on a grid and joins them with link edges.
 * Qubit id = slot * chiplet_size + local id, slot = i*m + j. Edge ids follow
 * the same scheme (slot * chiplet_edges + local edge), with link edges
 * appended last: for each slot, its right links then its bottom links.
 */
inline Topology stitch_mcm(const McmSpec& spec, int qubit_cap = 0) {
  spec.validate(qubit_cap);
  const Topology chip = build_chiplet(spec.chiplet);
  const auto c = static_cast<QubitId>(chip.qubit_count());

  // Local ids of the left column and top row, for attaching incoming links.
  std::unordered_map<int, QubitId> left_of_row, top_of_col;
  for (QubitId q = 0; q < c; ++q) {
    const LatticeCoord xy = chip.coord_of(q);
    if (xy.row % 2 == 0 && xy.col == 0) left_of_row[xy.row / 2] = q;
    if (xy.row == 0) top_of_col[xy.col] = q;
  }

  const int display_rows = 2 * spec.chiplet.dense_rows;
  Topology t;
  for (int i = 0; i < spec.rows; ++i) {
    for (int j = 0; j < spec.cols; ++j) {
      const auto slot = static_cast<std::uint32_t>(i * spec.cols + j);
      for (QubitId q = 0; q < c; ++q) {
        const LatticeCoord xy = chip.coord_of(q);
        t.add_qubit(chip.class_of(q), slot, {xy.row + i * display_rows, xy.col + j * spec.chiplet.row_length});
      }
    }
  }
  for (std::uint32_t slot = 0; slot < static_cast<std::uint32_t>(spec.chiplet_count()); ++slot) {
    for (const Edge& e : chip.edges()) {
      t.add_edge(slot * c + e.a, slot * c + e.b, slot * c + e.control, false);
    }
  }
  for (int i = 0; i < spec.rows; ++i) {
    for (int j = 0; j < spec.cols; ++j) {
      const QubitId base = static_cast<QubitId>(i * spec.cols + j) * c;
      for (const LinkStub& stub : chip.stubs()) {
        if (stub.side == StubSide::Right && j + 1 < spec.cols) {
          const QubitId other = static_cast<QubitId>(i * spec.cols + j + 1) * c + left_of_row.at(stub.index);
          t.add_edge(base + stub.qubit, other, base + stub.qubit, true);
        }
      }
      for (const LinkStub& stub : chip.stubs()) {
        if (stub.side == StubSide::Bottom && i + 1 < spec.rows) {
          const QubitId other = static_cast<QubitId>((i + 1) * spec.cols + j) * c + top_of_col.at(stub.index);
          t.add_edge(base + stub.qubit, other, base + stub.qubit, true);
        }
      }
      for (const LinkStub& stub : chip.stubs()) {
        const bool dangling = (stub.side == StubSide::Right && j + 1 == spec.cols) ||
                              (stub.side == StubSide::Bottom && i + 1 == spec.rows);
        if (dangling) t.add_stub({base + stub.qubit, stub.side, stub.index});
      }
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Pattern validation

enum class PatternRule : std::uint8_t {
  AdjacentSameClass,
  F2Degree,
  F2NeighborClasses,
  EdgeWithoutF2,
  ControlNotF2,
  LinkMarking,
  Disconnected,
};

inline const char* to_string(PatternRule r) {
  switch (r) {
    case PatternRule::AdjacentSameClass: return "adjacent same class";
    case PatternRule::F2Degree: return "F2 degree";
    case PatternRule::F2NeighborClasses: return "F2 neighbors share a class";
    case PatternRule::EdgeWithoutF2: return "edge without F2 endpoint";
    case PatternRule::ControlNotF2: return "control is not the F2 endpoint";
    case PatternRule::LinkMarking: return "link marking mismatch";
    case PatternRule::Disconnected: return "disconnected";
  }
  return "?";
}

struct PatternViolation {
  PatternRule rule;
  std::vector<QubitId> qubits;
};

/// Empty iff every frequency-pattern invariant holds.
inline std::vector<PatternViolation> validate_frequency_pattern(const Topology& t) {
  std::vector<PatternViolation> out;
  for (const Edge& e : t.edges()) {
    const FrequencyClass ca = t.class_of(e.a);
    const FrequencyClass cb = t.class_of(e.b);
    if (ca == cb) {
      out.push_back({PatternRule::AdjacentSameClass, {e.a, e.b}});
    } else if (ca != FrequencyClass::F2 && cb != FrequencyClass::F2) {
      out.push_back({PatternRule::EdgeWithoutF2, {e.a, e.b}});
    } else {
      const QubitId f2 = ca == FrequencyClass::F2 ? e.a : e.b;
      if (e.control != f2) out.push_back({PatternRule::ControlNotF2, {e.a, e.b}});
    }
    const bool crosses = t.chiplet_of(e.a) != t.chiplet_of(e.b);
    if (crosses != e.is_link) out.push_back({PatternRule::LinkMarking, {e.a, e.b}});
  }
  for (QubitId q = 0; q < t.qubit_count(); ++q) {
    if (t.class_of(q) != FrequencyClass::F2) continue;
    const auto& nb = t.neighbors(q);
    if (nb.size() > 2) {
      std::vector<QubitId> ids{q};
      ids.insert(ids.end(), nb.begin(), nb.end());
      out.push_back({PatternRule::F2Degree, ids});
    } else if (nb.size() == 2 && t.class_of(nb[0]) == t.class_of(nb[1])) {
      out.push_back({PatternRule::F2NeighborClasses, {q, nb[0], nb[1]}});
    }
  }
  if (!t.is_connected()) out.push_back({PatternRule::Disconnected, {}});
  return out;
}

}  // namespace chiplet
