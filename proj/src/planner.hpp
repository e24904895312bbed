#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "lifetime.hpp"
#include "netmodel.hpp"

namespace iiotfwd {

struct LinkStatus {
  NodeId to;
  double eps = 0.0;
  double latency_ms = 0.0;
};

/// What a node uploads to the controller: E_u, eps_uv, l_uv.
struct StatusReport {
  NodeId node;
  double energy = 0.0;
  std::vector<LinkStatus> links;
};

std::vector<StatusReport> collect_status(const NetworkState& net);

/// The controller's picture of the network, rebuilt from status reports only.
class PlannerView {
 public:
  struct Arc {
    NodeId to;
    double eps = 0.0;
    double latency_ms = 0.0;
    double round_trip_ms = 0.0;  // l_uv + l_vu
  };

  PlannerView(std::span<const StatusReport> status, std::size_t node_count);

  std::size_t size() const { return energy_.size(); }
  bool present(NodeId u) const { return present_[u.index()]; }
  double energy(NodeId u) const { return energy_[u.index()]; }
  std::span<const Arc> arcs(NodeId u) const { return arcs_[u.index()]; }
  const Arc* arc(NodeId u, NodeId v) const;

 private:
  std::vector<double> energy_;
  std::vector<bool> present_;
  std::vector<std::vector<Arc>> arcs_;
};

struct PathQuery {
  NodeId from;
  NodeId to;
  double budget_ms = std::numeric_limits<double>::infinity();
  double rate = 0.0;         // pieces per cycle added to every hop
  bool round_trip = false;   // weigh hops by l_uv + l_vu instead of l_uv
};

struct PathChoice {
  std::vector<NodeId> hops;
  double bottleneck = 0.0;  // min projected lifetime over transmitting nodes
  double latency_ms = 0.0;  // in the query's latency measure
};

/// Among simple paths within the latency budget, one maximizing the minimum
/// projected lifetime of its transmitting nodes. `load` holds each node's
/// already-committed J/cycle. Ties: fewer hops, then smallest id sequence.
std::optional<PathChoice> bottleneck_path(const PlannerView& view, const PathQuery& query,
                                          std::span<const double> load, const LifetimeParams& params);

struct PlanEntry {
  PieceId piece = 0;
  NodeId proxy;
  std::vector<NodeId> source_path;
  std::vector<NodeId> consumer_path;
  double round_trip_ms = 0.0;
  double bottleneck = 0.0;
};

struct Plan {
  std::vector<PlanEntry> entries;   // ascending piece id
  std::vector<PieceId> infeasible;  // no latency-feasible route this time
  std::vector<PieceId> skipped;     // source or consumer not alive

  const PlanEntry* find(PieceId piece) const;
  nlohmann::json to_json() const;
};

class PlanningError : public std::runtime_error {
 public:
  PlanningError(PieceId piece, const std::string& what) : std::runtime_error(what), piece_(piece) {}
  PieceId piece() const { return piece_; }

 private:
  PieceId piece_;
};

/// Greedy max-min plan; never throws for infeasible pieces, it lists them.
Plan plan_pieces(std::span<const StatusReport> status, std::size_t node_count,
                 std::span<const NodeId> proxies, std::span<const DataPiece> pieces, double l_max_ms,
                 const LifetimeParams& params);

/// As plan_pieces, but any infeasible piece is a PlanningError.
Plan compute_plan(std::span<const StatusReport> status, std::size_t node_count,
                  std::span<const NodeId> proxies, std::span<const DataPiece> pieces, double l_max_ms,
                  const LifetimeParams& params);

/// Writes a plan into the path table and the pieces' proxy assignment.
/// Pieces without an entry lose their proxy and rows.
void install_plan(const Plan& plan, std::vector<DataPiece>& pieces, PathTable& table);

struct Recomputation {
  Plan plan;
  std::size_t nodes_charged = 0;
  double joules_charged = 0.0;
};

/// Central reconfiguration: every alive node uploads its status at eps_cc,
/// then a fresh plan is computed over the updated state.
Recomputation recompute_central(NetworkState& net, EnergyLedger& ledger,
                                std::span<const DataPiece> pieces, double l_max_ms,
                                const LifetimeParams& params);

}  // namespace iiotfwd
