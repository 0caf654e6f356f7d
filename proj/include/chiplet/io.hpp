#pragma once

// Text formats: topology and device JSON, the line-oriented circuit format,
// and the number formatting shared by every CSV writer.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "chiplet/bench.hpp"
#include "chiplet/device.hpp"
#include "chiplet/hexlattice.hpp"

namespace chiplet {

/// Shortest decimal that round-trips; identical on every platform.
inline std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Topology

inline nlohmann::json topology_to_json(const Topology& t) {
  nlohmann::json j;
  j["format"] = "chiplet-topology";
  j["version"] = 1;
  j["qubits"] = nlohmann::json::array();
  for (QubitId q = 0; q < t.qubit_count(); ++q) {
    const LatticeCoord xy = t.coord_of(q);
    j["qubits"].push_back({{"id", q}, {"class", to_string(t.class_of(q))}, {"chiplet", t.chiplet_of(q)},
                           {"row", xy.row}, {"col", xy.col}});
  }
  j["edges"] = nlohmann::json::array();
  for (const Edge& e : t.edges()) {
    j["edges"].push_back({{"a", e.a}, {"b", e.b}, {"control", e.control}, {"is_link", e.is_link}});
  }
  j["stubs"] = nlohmann::json::array();
  for (const LinkStub& s : t.stubs()) {
    j["stubs"].push_back({{"qubit", s.qubit}, {"side", s.side == StubSide::Right ? "right" : "bottom"}, {"index", s.index}});
  }
  return j;
}

inline Topology topology_from_json(const nlohmann::json& j) {
  auto fail = [](const std::string& what) { throw std::invalid_argument("topology file: " + what); };
  if (!j.is_object() || j.value("format", "") != "chiplet-topology") fail("format must be 'chiplet-topology'");
  if (j.value("version", 0) != 1) fail("unsupported version");
  Topology t;
  try {
    const auto& qs = j.at("qubits");
    for (std::size_t i = 0; i < qs.size(); ++i) {
      const auto& q = qs[i];
      if (q.at("id").get<std::size_t>() != i) fail("qubit ids must be 0..n-1 in order");
      t.add_qubit(frequency_class_from_string(q.at("class").get<std::string>()), q.value("chiplet", 0u),
                  {q.value("row", 0), q.value("col", 0)});
    }
    for (const auto& e : j.at("edges")) {
      t.add_edge(e.at("a").get<QubitId>(), e.at("b").get<QubitId>(), e.at("control").get<QubitId>(),
                 e.value("is_link", false));
    }
    if (j.contains("stubs")) {
      for (const auto& s : j.at("stubs")) {
        const std::string side = s.at("side").get<std::string>();
        if (side != "right" && side != "bottom") fail("stub side must be 'right' or 'bottom'");
        t.add_stub({s.at("qubit").get<QubitId>(), side == "right" ? StubSide::Right : StubSide::Bottom,
                    s.at("index").get<int>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(e.what());
  }
  return t;
}

// ---------------------------------------------------------------------------
// Device

inline nlohmann::json device_to_json(const DeviceInstance& d) {
  if (!d.topology) throw std::invalid_argument("device has no topology");
  nlohmann::json j;
  j["format"] = "chiplet-device";
  j["version"] = 1;
  j["trial"] = d.trial_index;
  j["seed"] = {{"master", d.seed_lineage.master}, {"path", d.seed_lineage.path}};
  j["topology"] = topology_to_json(*d.topology);
  j["frequencies_ghz"] = d.freq;
  if (d.has_noise()) {
    j["edge_infidelity"] = d.edge_infidelity;
  } else {
    j["edge_infidelity"] = nullptr;
  }
  return j;
}

inline DeviceInstance device_from_json(const nlohmann::json& j) {
  auto fail = [](const std::string& what) { throw std::invalid_argument("device file: " + what); };
  if (!j.is_object() || j.value("format", "") != "chiplet-device") fail("format must be 'chiplet-device'");
  DeviceInstance d;
  try {
    d.topology = std::make_shared<const Topology>(topology_from_json(j.at("topology")));
    d.freq = j.at("frequencies_ghz").get<std::vector<double>>();
    if (d.freq.size() != d.topology->qubit_count()) fail("frequency count does not match qubit count");
    if (!j.at("edge_infidelity").is_null()) {
      d.edge_infidelity = j.at("edge_infidelity").get<std::vector<double>>();
      if (d.edge_infidelity.size() != d.topology->edge_count()) fail("infidelity count does not match edge count");
    }
    d.trial_index = j.value("trial", std::uint64_t{0});
    if (j.contains("seed")) {
      d.seed_lineage.master = j.at("seed").at("master").get<std::uint64_t>();
      d.seed_lineage.path = j.at("seed").at("path").get<std::vector<std::uint64_t>>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(e.what());
  }
  return d;
}

// ---------------------------------------------------------------------------
// Circuits
//
//   circuit <family> <logical_qubits> <seed>
//   <op> <q0> [<q1>] [param=<value>]
//
// Two-qubit ops list two operands; a parameter, when present, is the last
// token and carries a `param=` prefix so it cannot be mistaken for a qubit.

inline std::string circuit_to_text(const Circuit& c) {
  std::ostringstream out;
  out << "circuit " << to_string(c.family) << ' ' << c.logical_qubits << ' ' << c.seed << '\n';
  for (const Gate& g : c.gates) {
    out << g.op << ' ' << g.q0;
    if (g.two_qubit) out << ' ' << g.q1;
    if (g.has_param) out << " param=" << format_number(g.param);
    out << '\n';
  }
  return out.str();
}

inline Circuit circuit_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto fail = [](std::size_t n, const std::string& what) {
    throw std::invalid_argument("circuit line " + std::to_string(n) + ": " + what);
  };
  if (!std::getline(in, line)) fail(1, "missing header");
  Circuit c;
  {
    std::istringstream h(line);
    std::string tag, family;
    if (!(h >> tag >> family >> c.logical_qubits >> c.seed) || tag != "circuit") {
      fail(1, "header must be 'circuit <family> <qubits> <seed>'");
    }
    c.family = bench_family_from_string(family);
  }
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string s; ls >> s;) tok.push_back(s);
    if (tok.empty()) continue;
    Gate g;
    g.op = tok[0];
    if (tok.back().rfind("param=", 0) == 0) {
      const std::string& v = tok.back();
      const auto res = std::from_chars(v.data() + 6, v.data() + v.size(), g.param);
      if (res.ec != std::errc() || res.ptr != v.data() + v.size()) fail(n, "bad parameter '" + v + "'");
      g.has_param = true;
      tok.pop_back();
    }
    if (tok.size() != 2 && tok.size() != 3) fail(n, "expected one or two operands");
    try {
      g.q0 = static_cast<std::uint32_t>(std::stoul(tok[1]));
      if (tok.size() == 3) {
        g.two_qubit = true;
        g.q1 = static_cast<std::uint32_t>(std::stoul(tok[2]));
      }
    } catch (const std::exception&) {
      fail(n, "operands must be non-negative integers");
    }
    c.gates.push_back(std::move(g));
  }
  c.validate();
  return c;
}

}  // namespace chiplet
