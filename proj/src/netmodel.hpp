#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace iiotfwd {

struct NodeId {
  std::uint32_t value = 0;

  constexpr NodeId() = default;
  constexpr explicit NodeId(std::uint32_t v) : value(v) {}
  constexpr std::size_t index() const { return value; }
  constexpr auto operator<=>(const NodeId&) const = default;
};

inline std::ostream& operator<<(std::ostream& os, NodeId id) { return os << id.value; }

using PieceId = std::uint32_t;

enum class Leg : std::uint8_t { Source = 0, Consumer = 1 };

const char* leg_name(Leg leg);

/// One directional half of a piece's route: source -> proxy or proxy -> consumer.
struct LegKey {
  PieceId piece = 0;
  Leg leg = Leg::Source;
  auto operator<=>(const LegKey&) const = default;
};

std::string to_string(const LegKey& key);

struct Position {
  double x = 0.0;
  double y = 0.0;
};

struct NodeState {
  NodeId id;
  Position pos;
  double energy = 0.0;          // joules, E_u^t
  double initial_energy = 0.0;  // joules, E_u^0
  bool is_proxy = false;
  bool alive = true;
};

/// Directed half of a radio link. eps is the transmitter's cost per piece.
struct LinkState {
  double eps = 0.0;       // J/piece, current cycle
  double eps_prev = 0.0;  // J/piece, previous cycle
  double base_eps = 0.0;  // J/piece without interference
  double latency_ms = 0.0;
};

struct DataPiece {
  PieceId id = 0;
  NodeId source;
  NodeId consumer;
  int rate = 0;  // pieces per cycle
  std::optional<NodeId> proxy;
  int size_bytes = 9;
};

NodeId leg_start(const DataPiece& piece, Leg leg);
NodeId leg_end(const DataPiece& piece, Leg leg);

struct LatencyEnergyConfig {
  double latency_min_ms = 8.0;
  double latency_max_ms = 12.0;
  double eps_uv = 50e-6;  // J/piece
  double eps_cc = 5e-3;   // J/message to the controller
  double node_energy_min = 0.0;
  double node_energy_max = 10.0;
  double proxy_energy = 30.0;
  double energy_cap = std::numeric_limits<double>::infinity();
};

class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NetworkState {
 public:
  NetworkState() = default;
  explicit NetworkState(double eps_cc) : eps_cc_(eps_cc) {}

  NodeId add_node(Position pos, double energy, bool is_proxy = false);
  /// Adds both directions; latency is shared, eps may differ per direction.
  void connect(NodeId u, NodeId v, double latency_ms, double eps_uv, double eps_vu);

  std::size_t size() const { return nodes_.size(); }
  const NodeState& node(NodeId id) const { return nodes_.at(id.index()); }
  NodeState& node(NodeId id) { return nodes_.at(id.index()); }
  std::span<const NodeState> nodes() const { return nodes_; }

  std::span<const NodeId> neighbors(NodeId u) const { return adj_.at(u.index()); }
  bool has_link(NodeId u, NodeId v) const { return find_link(u, v) != nullptr; }
  const LinkState& link(NodeId u, NodeId v) const;
  LinkState& link(NodeId u, NodeId v);
  const LinkState* find_link(NodeId u, NodeId v) const;
  std::size_t link_count() const;  // directed

  const std::vector<NodeId>& proxies() const { return proxies_; }
  bool is_proxy(NodeId u) const { return node(u).is_proxy; }
  double eps_cc() const { return eps_cc_; }

  std::size_t alive_count() const;
  /// Connectivity of the alive subgraph.
  bool connected() const;

  /// Copies eps into eps_prev for every link; the start of a cycle.
  void roll_eps();

  nlohmann::json snapshot() const;

 private:
  std::vector<NodeState> nodes_;
  std::vector<std::vector<NodeId>> adj_;
  std::vector<std::vector<LinkState>> out_;
  std::vector<NodeId> proxies_;
  double eps_cc_ = 5e-3;
};

NetworkState build_grid_topology(int rows, int cols, double spacing_m, double range_m,
                                 const std::set<NodeId>& proxy_ids,
                                 const LatencyEnergyConfig& link_params, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Distributed path state

struct PathRow {
  std::optional<NodeId> prev;
  std::optional<NodeId> next;
  // Position along the leg, strictly increasing from start to end. Joiners
  // compare ranks to tell a forward loop from a backward one.
  double rank = 0.0;
  // Lower bound on rank(next), strictly above rank.
  double next_rank = 1.0;
  bool next_active = true;  // x_uv for the outgoing hop
};

class PathTable {
 public:
  using NodeRows = std::map<LegKey, PathRow>;

  PathTable() = default;
  explicit PathTable(std::size_t node_count) : rows_(node_count) {}

  std::size_t node_count() const { return rows_.size(); }
  NodeRows& rows(NodeId u) { return rows_.at(u.index()); }
  const NodeRows& rows(NodeId u) const { return rows_.at(u.index()); }

  const PathRow* find(const LegKey& key, NodeId u) const;
  PathRow* find(const LegKey& key, NodeId u);
  PathRow& row(const LegKey& key, NodeId u) { return rows(u)[key]; }
  void erase(const LegKey& key, NodeId u) { rows(u).erase(key); }
  void clear_leg(const LegKey& key);
  void clear();

  /// Writes fresh pointers for hops[0] -> ... -> hops.back(), ranks 0..n-1.
  void install(const LegKey& key, std::span<const NodeId> hops);

  bool link_active(const LegKey& key, NodeId u, NodeId v) const;
  /// Legs for which (u,v) is activated, x_uv^i = 1.
  std::vector<LegKey> active_legs(NodeId u, NodeId v) const;

  void mark_broken(const LegKey& key) { broken_.insert(key); }
  bool broken(const LegKey& key) const { return broken_.contains(key); }
  const std::set<LegKey>& broken_legs() const { return broken_; }

 private:
  std::vector<NodeRows> rows_;
  std::set<LegKey> broken_;
};

class PathBrokenError : public std::runtime_error {
 public:
  PathBrokenError(NodeId at, const std::string& what) : std::runtime_error(what), at_(at) {}
  NodeId gap_at() const { return at_; }

 private:
  NodeId at_;
};

/// Sum of per-hop latencies along an explicit hop list.
double path_latency(const NetworkState& net, std::span<const NodeId> hops);
/// Walks next pointers of `key` from `from` until `to`.
double path_latency(const NetworkState& net, const PathTable& table, const LegKey& key, NodeId from,
                    NodeId to);
/// Request over the reversed consumer leg plus response over the leg.
double access_latency(const NetworkState& net, const PathTable& table, const DataPiece& piece);

/// Nodes visited following next pointers from the leg start. Stops at the
/// end, a gap, or the first repeated node (which is included once more).
std::vector<NodeId> trace_leg(const PathTable& table, const DataPiece& piece, Leg leg);

enum class ViolationKind { Loop, PointerAsymmetry, WrongEndpoint, InactiveLink, Gap };

const char* violation_name(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  LegKey leg;
  NodeId node;
  std::string detail;
};

struct PathReport {
  std::vector<Violation> violations;
  std::vector<LegKey> broken;  // flagged broken; only loops are reported for them
  std::size_t intact = 0;
  std::size_t unplanned = 0;

  bool clean() const { return violations.empty(); }
  std::size_t count(ViolationKind kind) const;
};

PathReport validate_paths(const NetworkState& net, const PathTable& table,
                          std::span<const DataPiece> pieces);

// ---------------------------------------------------------------------------
// Energy bookkeeping

enum class EnergyKind { Data, Config };

struct Transmission {
  NodeId node;
  double joules;
  EnergyKind kind;
};

/// Charges transmitters and keeps the audit trail.
class EnergyLedger {
 public:
  EnergyLedger() = default;
  explicit EnergyLedger(std::size_t node_count)
      : data_(node_count, 0.0), cfg_(node_count, 0.0) {}

  /// Debits `joules`. When the node cannot afford it the remainder is spent,
  /// energy drops to zero and false is returned.
  bool charge(NetworkState& net, NodeId u, double joules, EnergyKind kind);

  double data_total() const { return data_total_; }
  double config_total() const { return cfg_total_; }
  double spent(NodeId u) const { return data_[u.index()] + cfg_[u.index()]; }
  double spent(NodeId u, EnergyKind kind) const;
  std::uint64_t transmissions() const { return transmissions_; }

  /// Keeps every debit for audits. Off by default.
  void enable_log() { log_enabled_ = true; }
  const std::vector<Transmission>& log() const { return log_; }

 private:
  std::vector<double> data_;
  std::vector<double> cfg_;
  std::vector<Transmission> log_;
  bool log_enabled_ = false;
  double data_total_ = 0.0;
  double cfg_total_ = 0.0;
  std::uint64_t transmissions_ = 0;
};

}  // namespace iiotfwd

template <>
struct std::hash<iiotfwd::NodeId> {
  std::size_t operator()(iiotfwd::NodeId id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};
