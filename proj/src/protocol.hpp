#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "lifetime.hpp"
#include "message.hpp"
#include "netmodel.hpp"

namespace iiotfwd {

struct ProtocolParams {
  LifetimeParams lifetime;
  int ttl = 2;  // relays a route request may cross
  std::uint64_t retry_cap = 1024;  // longest back-off between repair attempts, cycles
};

/// A neighbor's link as the neighbor advertises it.
struct TwoHopLink {
  NodeId to;
  double latency_ms = 0.0;
  double eps = 0.0;
};

/// Everything a node knows about one neighbor.
struct NeighborInfo {
  NodeId id;
  bool alive = true;
  double energy = 0.0;
  double load = 0.0;  // J/cycle under its current rows
  // Own link toward the neighbor.
  double latency_ms = 0.0;
  double eps = 0.0;
  double eps_prev = 0.0;
  std::vector<TwoHopLink> links;

  const TwoHopLink* link_to(NodeId v) const;
};

/// The locally observable world of one node for one cycle.
struct LocalView {
  NodeId self;
  double load = 0.0;
  std::vector<NeighborInfo> neighbors;  // ascending id

  const NeighborInfo* neighbor(NodeId v) const;
};

/// What a node may know about a piece it carries: endpoints and rate.
struct PieceInfo {
  NodeId source;
  NodeId consumer;
  std::optional<NodeId> proxy;
  int rate = 0;
};

/// A repair this node owns: reconnect its row of `leg` to `target`.
struct Repair {
  LegKey leg;
  std::optional<NodeId> failed;
  NodeId target;
  double hi = 0.0;  // lower bound on rank(target)
  double reference_latency_ms = 0.0;
  int attempt = 0;
};

struct Discovery {
  Repair repair;
  std::uint64_t request = 0;
  std::uint64_t deadline = 0;
};

struct Retry {
  Repair repair;
  std::uint64_t at = 0;
};

struct Collection {
  LegKey leg;
  NodeId origin;
  std::uint64_t request = 0;
  std::uint64_t deadline = 0;
  struct Candidate {
    std::vector<NodeId> route;
    double min_lifetime = 0.0;
  };
  std::vector<Candidate> candidates;
};

/// Per-node soft state beyond the path rows.
struct NodeProtocolState {
  std::map<NodeId, double> blocked;  // neighbor -> eps when the link tripped
  std::vector<Discovery> discoveries;
  std::vector<Retry> retries;  // failed discoveries waiting to try again
  std::vector<Collection> collections;
  std::set<std::pair<NodeId, std::uint64_t>> seen_requests;
  std::set<std::pair<LegKey, std::uint64_t>> seen_waves;
  std::uint64_t next_request = 1;
  std::uint64_t next_wave = 1;
};

/// The node's only channel to the outside. Implemented by the runtime.
class NodeIo {
 public:
  virtual ~NodeIo() = default;
  /// Queues a message for delivery next cycle and charges the sender.
  /// False when the sender could not pay; the message is then dropped.
  virtual bool send(Message m) = 0;
  virtual double energy() const = 0;
  virtual std::uint64_t cycle() const = 0;
  virtual PieceInfo piece(PieceId id) const = 0;
  virtual void leg_broken(const LegKey& leg, const std::string& why) = 0;
  virtual void reconfigured(const LegKey& leg) = 0;
  virtual void discovery_failed(const Repair& repair) = 0;
  virtual void set_dead() = 0;
  virtual void diagnostic(const std::string& what) = 0;
  /// A deletion wave erased this node's row.
  virtual void wave_deactivation() = 0;
  /// The leg was declared broken and torn down; pending messages are moot.
  virtual bool torn_down(const LegKey& leg) const = 0;
};

struct NodeContext {
  const LocalView& view;
  PathTable::NodeRows& rows;
  NodeProtocolState& state;
  NodeIo& io;
  const ProtocolParams& params;
};

// Node handlers. They see only the context.
void node_cycle(NodeContext& ctx, std::span<const Message> inbox);
void handle_alert(NodeContext& ctx, const LegKey& leg, const AlertMsg& msg);
/// Deactivates the outgoing link to `v` for every leg using it and starts the repairs.
void trip_link(NodeContext& ctx, NodeId v);
void local_path_config(NodeContext& ctx, const LegKey& leg, std::optional<NodeId> failed, NodeId target,
                       double hi, double reference_latency_ms);
void join_path(NodeContext& ctx, const LegKey& leg, const JoinMsg& msg);
void modify_path(NodeContext& ctx, const LegKey& leg, const ModifyPathMsg& msg);
void local_aodv_plus(NodeContext& ctx, const Repair& repair);
void handle_route_request(NodeContext& ctx, const LegKey& leg, const RouteRequestMsg& msg);
void handle_route_reply(NodeContext& ctx, const LegKey& leg, const RouteReplyMsg& msg);
void disconnect(NodeContext& ctx);

struct ProtocolStats {
  std::uint64_t messages = 0;
  std::uint64_t alerts = 0;
  std::uint64_t joins = 0;
  std::uint64_t modifies = 0;
  std::uint64_t modify_forwards = 0;  // deletion-wave hops after the first
  std::uint64_t wave_deactivations = 0;
  std::uint64_t route_requests = 0;
  std::uint64_t route_replies = 0;
  std::uint64_t reconfigs = 0;
  std::uint64_t broken_legs = 0;
  std::uint64_t failed_discoveries = 0;
  std::uint64_t dropped = 0;  // unaffordable or addressed to a dead node
};

/// Runs the distributed protocol over a shared network, path table and
/// pieces: builds each node's local view, delivers messages a cycle after
/// they are sent, charges senders, and garbage-collects orphaned rows.
class ProtocolRuntime {
 public:
  ProtocolRuntime(NetworkState& net, PathTable& table, std::vector<DataPiece>& pieces, EnergyLedger& ledger,
                  ProtocolParams params);

  /// Every alive node runs node_cycle once, ascending id.
  void step(std::uint64_t cycle);

  /// No message in flight and no discovery waiting for replies. Scheduled
  /// retries of failed discoveries do not count.
  bool quiescent() const;

  /// Forced exit of one node outside its own cycle, as the guard would do.
  void disconnect_now(NodeId u, std::uint64_t cycle);

  /// Test hook: trip the outgoing link (u, v) on every leg using it.
  void fail_link_now(NodeId u, NodeId v, std::uint64_t cycle);

  const ProtocolStats& stats() const { return stats_; }
  std::uint64_t reconfigs_in_last_step() const { return step_reconfigs_; }
  std::span<const NodeId> deaths_in_last_step() const { return step_dead_; }

  void enable_trace() { trace_enabled_ = true; }
  std::vector<std::string> take_trace();
  void trace_external(const Message& m, std::uint64_t cycle);

  const NodeProtocolState& node_state(NodeId u) const { return states_.at(u.index()); }
  LocalView view_of(NodeId u) const;
  std::span<const std::string> diagnostics() const { return diagnostics_; }

 private:
  class Io;
  friend class Io;

  static constexpr std::size_t kMaxDiagnostics = 2000;

  template <class F>
  void with_node(NodeId u, std::uint64_t cycle, F&& f);
  void flush();
  void note(std::string what);
  void mark_broken(const LegKey& leg);
  void sweep();
  bool leg_busy(const LegKey& leg) const;

  NetworkState& net_;
  PathTable& table_;
  std::vector<DataPiece>& pieces_;
  EnergyLedger& ledger_;
  ProtocolParams params_;
  std::vector<NodeProtocolState> states_;
  std::vector<Message> in_flight_;  // delivered next step
  std::vector<Message> outgoing_;   // sent during this step
  ProtocolStats stats_;
  std::uint64_t step_reconfigs_ = 0;
  std::vector<NodeId> step_dead_;
  bool trace_enabled_ = false;
  std::vector<std::string> trace_;
  std::vector<std::string> diagnostics_;
};

}  // namespace iiotfwd
