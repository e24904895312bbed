#include "netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>
#include <sstream>

namespace iiotfwd {

const char* leg_name(Leg leg) { return leg == Leg::Source ? "src" : "con"; }

std::string to_string(const LegKey& key) {
  return std::to_string(key.piece) + "/" + leg_name(key.leg);
}

NodeId leg_start(const DataPiece& piece, Leg leg) {
  if (leg == Leg::Source) return piece.source;
  if (!piece.proxy) throw std::logic_error("piece " + std::to_string(piece.id) + " has no proxy");
  return *piece.proxy;
}

NodeId leg_end(const DataPiece& piece, Leg leg) {
  if (leg == Leg::Consumer) return piece.consumer;
  if (!piece.proxy) throw std::logic_error("piece " + std::to_string(piece.id) + " has no proxy");
  return *piece.proxy;
}

NodeId NetworkState::add_node(Position pos, double energy, bool is_proxy) {
  NodeId id{static_cast<std::uint32_t>(nodes_.size())};
  nodes_.push_back(NodeState{id, pos, energy, energy, is_proxy, true});
  adj_.emplace_back();
  out_.emplace_back();
  if (is_proxy) proxies_.push_back(id);
  return id;
}

void NetworkState::connect(NodeId u, NodeId v, double latency_ms, double eps_uv, double eps_vu) {
  if (u == v) throw TopologyError("self link at node " + std::to_string(u.value));
  if (u.index() >= size() || v.index() >= size()) throw TopologyError("link to unknown node");
  if (!(latency_ms > 0.0) || !(eps_uv > 0.0) || !(eps_vu > 0.0)) {
    throw TopologyError("link latency and eps must be positive");
  }
  if (has_link(u, v)) throw TopologyError("duplicate link");
  auto insert = [this](NodeId a, NodeId b, LinkState s) {
    auto& nbrs = adj_[a.index()];
    auto pos = std::lower_bound(nbrs.begin(), nbrs.end(), b);
    auto offset = pos - nbrs.begin();
    nbrs.insert(pos, b);
    out_[a.index()].insert(out_[a.index()].begin() + offset, s);
  };
  insert(u, v, LinkState{eps_uv, eps_uv, eps_uv, latency_ms});
  insert(v, u, LinkState{eps_vu, eps_vu, eps_vu, latency_ms});
}

const LinkState* NetworkState::find_link(NodeId u, NodeId v) const {
  const auto& nbrs = adj_.at(u.index());
  auto pos = std::lower_bound(nbrs.begin(), nbrs.end(), v);
  if (pos == nbrs.end() || *pos != v) return nullptr;
  return &out_[u.index()][static_cast<std::size_t>(pos - nbrs.begin())];
}

const LinkState& NetworkState::link(NodeId u, NodeId v) const {
  const LinkState* l = find_link(u, v);
  if (!l) {
    throw TopologyError("no link " + std::to_string(u.value) + "->" + std::to_string(v.value));
  }
  return *l;
}

LinkState& NetworkState::link(NodeId u, NodeId v) {
  return const_cast<LinkState&>(std::as_const(*this).link(u, v));
}

std::size_t NetworkState::link_count() const {
  std::size_t n = 0;
  for (const auto& a : adj_) n += a.size();
  return n;
}

std::size_t NetworkState::alive_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const NodeState& n) { return n.alive; }));
}

bool NetworkState::connected() const {
  auto first = std::find_if(nodes_.begin(), nodes_.end(), [](const NodeState& n) { return n.alive; });
  if (first == nodes_.end()) return true;
  std::vector<bool> seen(size(), false);
  std::queue<NodeId> frontier;
  frontier.push(first->id);
  seen[first->id.index()] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    NodeId u = frontier.front();
    frontier.pop();
    for (NodeId v : neighbors(u)) {
      if (seen[v.index()] || !node(v).alive) continue;
      seen[v.index()] = true;
      ++reached;
      frontier.push(v);
    }
  }
  return reached == alive_count();
}

void NetworkState::roll_eps() {
  for (auto& links : out_) {
    for (auto& l : links) l.eps_prev = l.eps;
  }
}

nlohmann::json NetworkState::snapshot() const {
  nlohmann::json doc;
  doc["eps_cc_J"] = eps_cc_;
  auto& nodes = doc["nodes"] = nlohmann::json::array();
  for (const auto& n : nodes_) {
    nodes.push_back({{"id", n.id.value},
                     {"x", n.pos.x},
                     {"y", n.pos.y},
                     {"energy_J", n.energy},
                     {"initial_energy_J", n.initial_energy},
                     {"proxy", n.is_proxy},
                     {"alive", n.alive}});
  }
  auto& links = doc["links"] = nlohmann::json::array();
  for (std::size_t u = 0; u < adj_.size(); ++u) {
    for (std::size_t k = 0; k < adj_[u].size(); ++k) {
      const auto& l = out_[u][k];
      links.push_back({{"from", u},
                       {"to", adj_[u][k].value},
                       {"eps_J", l.eps},
                       {"latency_ms", l.latency_ms}});
    }
  }
  return doc;
}

NetworkState build_grid_topology(int rows, int cols, double spacing_m, double range_m,
                                 const std::set<NodeId>& proxy_ids,
                                 const LatencyEnergyConfig& cfg, std::uint64_t seed) {
  if (rows < 1 || cols < 1 || rows * cols < 2) throw TopologyError("grid needs at least two nodes");
  if (!(spacing_m > 0.0)) throw TopologyError("grid spacing must be positive");
  if (cfg.latency_min_ms <= 0.0 || cfg.latency_max_ms < cfg.latency_min_ms) {
    throw TopologyError("latency interval must be positive and ordered");
  }
  const auto count = static_cast<std::uint32_t>(rows * cols);
  for (NodeId p : proxy_ids) {
    if (p.value >= count) throw TopologyError("proxy id " + std::to_string(p.value) + " outside grid");
  }

  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x70u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> energy_dist(cfg.node_energy_min, cfg.node_energy_max);
  std::uniform_real_distribution<double> latency_dist(cfg.latency_min_ms, cfg.latency_max_ms);

  NetworkState net(cfg.eps_cc);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      NodeId id{static_cast<std::uint32_t>(r * cols + c)};
      bool proxy = proxy_ids.contains(id);
      double e = proxy ? cfg.proxy_energy : energy_dist(rng);
      net.add_node({c * spacing_m, r * spacing_m}, std::min(e, cfg.energy_cap), proxy);
    }
  }
  for (std::uint32_t u = 0; u < count; ++u) {
    for (std::uint32_t v = u + 1; v < count; ++v) {
      const auto& a = net.node(NodeId{u}).pos;
      const auto& b = net.node(NodeId{v}).pos;
      double d = std::hypot(a.x - b.x, a.y - b.y);
      if (d <= range_m + 1e-9) {
        net.connect(NodeId{u}, NodeId{v}, latency_dist(rng), cfg.eps_uv, cfg.eps_uv);
      }
    }
  }
  if (!net.connected()) {
    std::ostringstream msg;
    msg << "disconnected topology: range " << range_m << " m does not link a " << rows << "x" << cols
        << " grid at " << spacing_m << " m spacing";
    throw TopologyError(msg.str());
  }
  return net;
}

// ---------------------------------------------------------------------------

const PathRow* PathTable::find(const LegKey& key, NodeId u) const {
  const auto& r = rows(u);
  auto it = r.find(key);
  return it == r.end() ? nullptr : &it->second;
}

PathRow* PathTable::find(const LegKey& key, NodeId u) {
  return const_cast<PathRow*>(std::as_const(*this).find(key, u));
}

void PathTable::clear_leg(const LegKey& key) {
  for (auto& r : rows_) r.erase(key);
  broken_.erase(key);
}

void PathTable::clear() {
  for (auto& r : rows_) r.clear();
  broken_.clear();
}

void PathTable::install(const LegKey& key, std::span<const NodeId> hops) {
  clear_leg(key);
  for (std::size_t k = 0; k < hops.size(); ++k) {
    PathRow& r = row(key, hops[k]);
    r.rank = static_cast<double>(k);
    r.next_rank = static_cast<double>(k + 1);
    if (k > 0) r.prev = hops[k - 1];
    if (k + 1 < hops.size()) r.next = hops[k + 1];
    r.next_active = true;
  }
}

bool PathTable::link_active(const LegKey& key, NodeId u, NodeId v) const {
  const PathRow* r = find(key, u);
  return r && r->next == v && r->next_active;
}

std::vector<LegKey> PathTable::active_legs(NodeId u, NodeId v) const {
  std::vector<LegKey> out;
  for (const auto& [key, r] : rows(u)) {
    if (r.next == v && r.next_active) out.push_back(key);
  }
  return out;
}

// ---------------------------------------------------------------------------

double path_latency(const NetworkState& net, std::span<const NodeId> hops) {
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < hops.size(); ++k) total += net.link(hops[k], hops[k + 1]).latency_ms;
  return total;
}

double path_latency(const NetworkState& net, const PathTable& table, const LegKey& key, NodeId from,
                    NodeId to) {
  double total = 0.0;
  NodeId cur = from;
  std::size_t guard = 0;
  while (cur != to) {
    const PathRow* r = table.find(key, cur);
    if (!r || !r->next) {
      throw PathBrokenError(cur, "leg " + to_string(key) + " has no next pointer at node " +
                                     std::to_string(cur.value));
    }
    const LinkState* l = net.find_link(cur, *r->next);
    if (!l) {
      throw PathBrokenError(cur, "leg " + to_string(key) + " points across a missing link at node " +
                                     std::to_string(cur.value));
    }
    total += l->latency_ms;
    cur = *r->next;
    if (++guard > table.node_count()) {
      throw PathBrokenError(cur, "leg " + to_string(key) + " loops through node " +
                                     std::to_string(cur.value));
    }
  }
  return total;
}

double access_latency(const NetworkState& net, const PathTable& table, const DataPiece& piece) {
  LegKey key{piece.id, Leg::Consumer};
  NodeId proxy = leg_start(piece, Leg::Consumer);
  double response = path_latency(net, table, key, proxy, piece.consumer);
  // The request retraces the response hops in reverse.
  double request = 0.0;
  NodeId cur = proxy;
  while (cur != piece.consumer) {
    NodeId nxt = *table.find(key, cur)->next;
    request += net.link(nxt, cur).latency_ms;
    cur = nxt;
  }
  return request + response;
}

std::vector<NodeId> trace_leg(const PathTable& table, const DataPiece& piece, Leg leg) {
  LegKey key{piece.id, leg};
  NodeId end = leg_end(piece, leg);
  std::vector<NodeId> hops{leg_start(piece, leg)};
  std::vector<bool> seen(table.node_count(), false);
  seen[hops.front().index()] = true;
  while (hops.back() != end) {
    const PathRow* r = table.find(key, hops.back());
    if (!r || !r->next) break;
    NodeId nxt = *r->next;
    hops.push_back(nxt);
    if (nxt.index() >= seen.size() || seen[nxt.index()]) break;
    seen[nxt.index()] = true;
  }
  return hops;
}

const char* violation_name(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::Loop: return "loop";
    case ViolationKind::PointerAsymmetry: return "pointer-asymmetry";
    case ViolationKind::WrongEndpoint: return "wrong-endpoint";
    case ViolationKind::InactiveLink: return "inactive-link";
    case ViolationKind::Gap: return "gap";
  }
  return "?";
}

std::size_t PathReport::count(ViolationKind kind) const {
  return static_cast<std::size_t>(std::count_if(violations.begin(), violations.end(),
                                                [kind](const Violation& v) { return v.kind == kind; }));
}

namespace {

void check_leg(const NetworkState& net, const PathTable& table, const DataPiece& piece, Leg leg,
               PathReport& report) {
  LegKey key{piece.id, leg};
  const bool flagged = table.broken(key);
  NodeId start = leg_start(piece, leg);
  NodeId end = leg_end(piece, leg);
  std::vector<Violation> found;
  auto add = [&](ViolationKind k, NodeId at, std::string detail) {
    found.push_back(Violation{k, key, at, std::move(detail)});
  };

  const PathRow* start_row = table.find(key, start);
  if (!start_row) {
    add(ViolationKind::Gap, start, "leg start holds no row");
  } else if (start_row->prev) {
    add(ViolationKind::WrongEndpoint, start, "leg start has a previous pointer");
  }

  std::vector<bool> seen(net.size(), false);
  NodeId cur = start;
  seen[cur.index()] = true;
  while (start_row && cur != end) {
    const PathRow* r = table.find(key, cur);
    if (!r) {
      add(ViolationKind::Gap, cur, "node on the leg holds no row");
      break;
    }
    if (!r->next) {
      add(ViolationKind::WrongEndpoint, cur, "leg ends before reaching its endpoint");
      break;
    }
    NodeId nxt = *r->next;
    if (!net.has_link(cur, nxt)) {
      add(ViolationKind::Gap, cur, "next pointer crosses a missing link");
      break;
    }
    if (!r->next_active) {
      add(ViolationKind::InactiveLink, cur, "traversed link is deactivated");
      break;
    }
    if (seen[nxt.index()]) {
      add(ViolationKind::Loop, nxt, "node " + std::to_string(nxt.value) + " visited twice");
      break;
    }
    seen[nxt.index()] = true;
    const PathRow* nr = table.find(key, nxt);
    if (nr && nr->prev != cur) {
      add(ViolationKind::PointerAsymmetry, nxt,
          "next(" + std::to_string(cur.value) + ")=" + std::to_string(nxt.value) + " but previous(" +
              std::to_string(nxt.value) + ")=" + (nr->prev ? std::to_string(nr->prev->value) : "none"));
    }
    cur = nxt;
  }
  if (cur == end && start_row) {
    const PathRow* er = table.find(key, end);
    if (er && er->next) add(ViolationKind::WrongEndpoint, end, "leg end has a next pointer");
  }

  if (flagged) {
    report.broken.push_back(key);
    for (auto& v : found) {
      if (v.kind == ViolationKind::Loop) report.violations.push_back(std::move(v));
    }
    return;
  }
  if (found.empty()) ++report.intact;
  for (auto& v : found) report.violations.push_back(std::move(v));
}

}  // namespace

PathReport validate_paths(const NetworkState& net, const PathTable& table,
                          std::span<const DataPiece> pieces) {
  PathReport report;
  for (const auto& piece : pieces) {
    if (!piece.proxy) {
      ++report.unplanned;
      continue;
    }
    check_leg(net, table, piece, Leg::Source, report);
    check_leg(net, table, piece, Leg::Consumer, report);
  }
  return report;
}

// ---------------------------------------------------------------------------

bool EnergyLedger::charge(NetworkState& net, NodeId u, double joules, EnergyKind kind) {
  NodeState& n = net.node(u);
  double paid = std::min(joules, n.energy);
  bool ok = n.energy >= joules;
  n.energy = ok ? n.energy - joules : 0.0;
  auto i = u.index();
  if (kind == EnergyKind::Data) {
    data_[i] += paid;
    data_total_ += paid;
  } else {
    cfg_[i] += paid;
    cfg_total_ += paid;
  }
  if (log_enabled_) log_.push_back(Transmission{u, paid, kind});
  ++transmissions_;
  return ok;
}

double EnergyLedger::spent(NodeId u, EnergyKind kind) const {
  return kind == EnergyKind::Data ? data_[u.index()] : cfg_[u.index()];
}

}  // namespace iiotfwd
