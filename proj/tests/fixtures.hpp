#pragma once

#include <cstdint>
#include <initializer_list>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "engine.hpp"
#include "netmodel.hpp"
#include "protocol.hpp"

namespace fixtures {

using namespace iiotfwd;

inline NodeId N(std::uint32_t v) { return NodeId{v}; }

struct Edge {
  std::uint32_t u;
  std::uint32_t v;
  double latency_ms = 10.0;
};

/// Nodes 0..n-1 with `energy` joules each, proxies flagged, links as given.
inline NetworkState graph(std::size_t n, std::initializer_list<Edge> edges, double energy = 10.0,
                          std::set<std::uint32_t> proxies = {}, double eps = 50e-6) {
  NetworkState net(100 * eps);
  for (std::size_t i = 0; i < n; ++i) {
    net.add_node(Position{static_cast<double>(i), 0.0}, energy, proxies.contains(static_cast<std::uint32_t>(i)));
  }
  for (const auto& e : edges) net.connect(N(e.u), N(e.v), e.latency_ms, eps, eps);
  return net;
}

inline std::vector<NodeId> ids(std::initializer_list<std::uint32_t> list) {
  std::vector<NodeId> out;
  for (auto v : list) out.push_back(N(v));
  return out;
}

/// A network, its pieces and path table, and the protocol runtime over them.
struct World {
  NetworkState net;
  std::vector<DataPiece> pieces;
  PathTable table;
  EnergyLedger ledger;
  std::unique_ptr<ProtocolRuntime> rt;
  std::uint64_t cycle = 1;

  World(NetworkState n, std::vector<DataPiece> p, ProtocolParams params = {})
      : net(std::move(n)), pieces(std::move(p)), table(net.size()), ledger(net.size()) {
    ledger.enable_log();
    rt = std::make_unique<ProtocolRuntime>(net, table, pieces, ledger, params);
  }

  void install(PieceId piece, Leg leg, std::vector<NodeId> hops) { table.install(LegKey{piece, leg}, hops); }

  void step() { rt->step(cycle++); }

  /// Steps until nothing is in flight; returns the cycles used.
  int settle(int limit = 200) {
    int used = 0;
    do {
      step();
      ++used;
    } while (!rt->quiescent() && used < limit);
    return used;
  }

  std::vector<NodeId> leg(PieceId piece, Leg l) const { return trace_leg(table, pieces.at(piece), l); }
};

/// NodeIo that records instead of delivering.
struct RecordingIo : NodeIo {
  std::vector<Message> sent;
  std::vector<std::string> broken;
  std::vector<std::string> diagnostics;
  std::vector<Repair> failed;
  std::map<PieceId, PieceInfo> pieces;
  std::set<LegKey> torn;
  double energy_j = 10.0;
  std::uint64_t now = 1;
  int reconfigs = 0;
  int deactivations = 0;
  bool dead = false;

  bool send(Message m) override {
    sent.push_back(std::move(m));
    return true;
  }
  double energy() const override { return energy_j; }
  std::uint64_t cycle() const override { return now; }
  PieceInfo piece(PieceId id) const override { return pieces.at(id); }
  void leg_broken(const LegKey& leg, const std::string& why) override {
    broken.push_back(why);
    torn.insert(leg);
  }
  void reconfigured(const LegKey&) override { ++reconfigs; }
  void discovery_failed(const Repair& r) override { failed.push_back(r); }
  void set_dead() override { dead = true; }
  void diagnostic(const std::string& what) override { diagnostics.push_back(what); }
  void wave_deactivation() override { ++deactivations; }
  bool torn_down(const LegKey& leg) const override { return torn.contains(leg); }

  template <class T>
  std::vector<Message> of() const {
    std::vector<Message> out;
    for (const auto& m : sent) {
      if (std::holds_alternative<T>(m.body)) out.push_back(m);
    }
    return out;
  }
};

/// Random connected graph on n nodes: a random spanning tree plus extra edges.
inline NetworkState random_graph(std::mt19937_64& rng, std::size_t n, double extra_p, double lat_lo = 5.0,
                                 double lat_hi = 15.0) {
  std::uniform_real_distribution<double> energy(0.0, 10.0);
  std::uniform_real_distribution<double> latency(lat_lo, lat_hi);
  std::uniform_real_distribution<double> eps(20e-6, 80e-6);
  std::bernoulli_distribution extra(extra_p);
  NetworkState net(5e-3);
  for (std::size_t i = 0; i < n; ++i) net.add_node(Position{static_cast<double>(i), 0.0}, energy(rng));
  for (std::size_t i = 1; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> parent(0, i - 1);
    net.connect(N(static_cast<std::uint32_t>(parent(rng))), N(static_cast<std::uint32_t>(i)), latency(rng), eps(rng),
                eps(rng));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      NodeId a = N(static_cast<std::uint32_t>(i));
      NodeId b = N(static_cast<std::uint32_t>(j));
      if (!net.has_link(a, b) && extra(rng)) net.connect(a, b, latency(rng), eps(rng), eps(rng));
    }
  }
  return net;
}

}  // namespace fixtures
