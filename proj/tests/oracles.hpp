#pragma once

// Brute-force references used by unit and acceptance tests.

#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <optional>
#include <vector>

#include "fixtures.hpp"
#include "planner.hpp"

namespace oracles {

using namespace iiotfwd;

/// Every simple path from `from` to `to` over alive nodes with energy.
inline std::vector<std::vector<NodeId>> simple_paths(const NetworkState& net, NodeId from, NodeId to) {
  std::vector<std::vector<NodeId>> out;
  std::vector<NodeId> path{from};
  std::vector<bool> on(net.size(), false);
  on[from.index()] = true;
  std::function<void(NodeId)> dfs = [&](NodeId u) {
    if (u == to) {
      out.push_back(path);
      return;
    }
    for (NodeId v : net.neighbors(u)) {
      const auto& n = net.node(v);
      if (on[v.index()] || !n.alive || n.energy <= 0.0) continue;
      on[v.index()] = true;
      path.push_back(v);
      dfs(v);
      path.pop_back();
      on[v.index()] = false;
    }
  };
  dfs(from);
  return out;
}

inline double hop_latency(const NetworkState& net, NodeId u, NodeId v, bool round_trip) {
  double l = net.link(u, v).latency_ms;
  return round_trip ? l + net.link(v, u).latency_ms : l;
}

inline double latency_of(const NetworkState& net, const std::vector<NodeId>& path, bool round_trip) {
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) total += hop_latency(net, path[k], path[k + 1], round_trip);
  return total;
}

inline double bottleneck_of(const NetworkState& net, const std::vector<NodeId>& path, double rate,
                            const std::vector<double>& load, const LifetimeParams& p) {
  double best = kInfiniteLifetime;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    NodeId u = path[k];
    double spend = load[u.index()] + net.link(u, path[k + 1]).eps * rate;
    best = std::min(best, node_lifetime_from_load(net.node(u).energy, spend, p));
  }
  return best;
}

/// Node lifetime written out case by case.
inline double lifetime_of(double energy, double spend, double e_cfg) {
  if (energy <= 0.0) return 0.0;
  if (energy <= e_cfg) return 1.0;
  if (spend == 0.0) return kInfiniteLifetime;
  return energy / spend;
}

/// Shortest lifetime among nodes with an active outgoing hop, rates summed
/// per neighbor first.
inline double epoch_bound(const NetworkState& net, const PathTable& table, std::span<const DataPiece> pieces,
                          const LifetimeParams& p) {
  double expected = kInfiniteLifetime;
  for (const auto& n : net.nodes()) {
    std::map<NodeId, double> a;
    for (const auto& piece : pieces) {
      for (Leg l : {Leg::Source, Leg::Consumer}) {
        const PathRow* r = table.find(LegKey{piece.id, l}, n.id);
        if (r && r->next && r->next_active) a[*r->next] += piece.rate;
      }
    }
    if (a.empty()) continue;
    double spend = 0.0;
    for (const auto& [v, rate] : a) spend += net.link(n.id, v).eps * rate;
    expected = std::min(expected, lifetime_of(n.energy, spend, p.e_cfg));
  }
  return expected;
}

/// Random instance for the epoch bound: up to four pieces on random walks.
struct EpochInstance {
  NetworkState net;
  std::vector<DataPiece> pieces;
  PathTable table;
};

inline EpochInstance random_epoch_instance(std::mt19937_64& rng, std::size_t max_nodes) {
  std::uniform_int_distribution<std::size_t> size(3, max_nodes);
  EpochInstance inst{fixtures::random_graph(rng, size(rng), 0.2), {}, {}};
  inst.table = PathTable(inst.net.size());
  std::uniform_int_distribution<std::uint32_t> node(0, static_cast<std::uint32_t>(inst.net.size() - 1));
  std::uniform_int_distribution<int> rate(0, 8);
  for (PieceId i = 0; i < 4; ++i) {
    std::vector<NodeId> hops{NodeId{node(rng)}};
    for (int h = 0; h < 5; ++h) {
      auto nb = inst.net.neighbors(hops.back());
      std::uniform_int_distribution<std::size_t> pick(0, nb.size() - 1);
      NodeId nxt = nb[pick(rng)];
      if (std::find(hops.begin(), hops.end(), nxt) != hops.end()) break;
      hops.push_back(nxt);
    }
    if (hops.size() < 2) continue;
    inst.pieces.push_back(DataPiece{i, hops.front(), hops.back(), rate(rng), hops.back()});
    inst.table.install(LegKey{i, Leg::Source}, hops);
    inst.table.install(LegKey{i, Leg::Consumer}, std::vector<NodeId>{hops.back()});
  }
  return inst;
}

struct Best {
  std::vector<NodeId> path;
  double bottleneck = 0.0;
  double latency = 0.0;
};

/// Highest bottleneck, then fewer hops, then smallest id sequence.
inline std::optional<Best> best_path(const NetworkState& net, NodeId from, NodeId to, double budget, double rate,
                                     bool round_trip, const std::vector<double>& load, const LifetimeParams& p) {
  std::optional<Best> best;
  for (auto& path : simple_paths(net, from, to)) {
    double lat = latency_of(net, path, round_trip);
    if (lat > budget) continue;
    double b = bottleneck_of(net, path, rate, load, p);
    bool better = !best || b > best->bottleneck ||
                  (b == best->bottleneck &&
                   (path.size() < best->path.size() || (path.size() == best->path.size() && path < best->path)));
    if (better) best = Best{path, b, lat};
  }
  return best;
}

}  // namespace oracles
