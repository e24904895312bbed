#include "protocol.hpp"

#include <algorithm>
#include <sstream>

namespace iiotfwd {

const char* message_name(const MessageBody& body) {
  static constexpr const char* names[] = {"status", "plan", "alert", "join", "modify_path", "rreq", "rrep"};
  return names[body.index()];
}

std::string trace_line(std::uint64_t cycle, const Message& m) {
  std::ostringstream os;
  os << cycle << ' ' << message_name(m.body) << ' ';
  if (m.from_controller) os << 'C'; else os << m.src.value;
  os << ' ';
  if (m.to_controller) os << 'C'; else os << m.dst.value;
  os << ' ';
  if (std::holds_alternative<StatusMsg>(m.body) || std::holds_alternative<PlanMsg>(m.body)) {
    os << '-';
  } else {
    os << to_string(m.leg);
  }
  if (const auto* mp = std::get_if<ModifyPathMsg>(&m.body)) {
    os << ' ' << (mp->del == DeleteArg::Yes ? "deleteYES" : "deleteNO") << ' '
       << (mp->dir == DirArg::Fwd ? "fwd" : "bwd");
  }
  return os.str();
}

const TwoHopLink* NeighborInfo::link_to(NodeId v) const {
  auto it = std::find_if(links.begin(), links.end(), [v](const TwoHopLink& l) { return l.to == v; });
  return it == links.end() ? nullptr : &*it;
}

const NeighborInfo* LocalView::neighbor(NodeId v) const {
  auto it = std::lower_bound(neighbors.begin(), neighbors.end(), v,
                             [](const NeighborInfo& n, NodeId id) { return n.id < id; });
  return it != neighbors.end() && it->id == v ? &*it : nullptr;
}

// ---------------------------------------------------------------------------
// Node handlers

namespace {

Message make(const NodeContext& ctx, NodeId dst, const LegKey& leg, MessageBody body) {
  return Message{ctx.view.self, dst, false, false, false, leg, std::move(body)};
}

bool send_or_break(NodeContext& ctx, NodeId dst, const LegKey& leg, MessageBody body) {
  if (ctx.io.send(make(ctx, dst, leg, std::move(body)))) return true;
  ctx.io.leg_broken(leg, "node " + std::to_string(ctx.view.self.value) + " could not pay for a repair message");
  return false;
}

bool is_blocked(const NodeContext& ctx, NodeId v) { return ctx.state.blocked.contains(v); }

std::uint64_t new_wave(NodeContext& ctx) {
  return (static_cast<std::uint64_t>(ctx.view.self.value) << 32) | ctx.state.next_wave++;
}

// The node with a tripped outgoing link leaves the leg; its predecessor repairs.
void fail_outgoing(NodeContext& ctx, const LegKey& leg) {
  PathRow& row = ctx.rows.at(leg);
  NodeId y = *row.next;
  row.next_active = false;
  if (row.prev) {
    AlertMsg alert{ctx.view.self, y, row.rank, row.next_rank};
    NodeId prev = *row.prev;
    ctx.rows.erase(leg);
    if (!ctx.io.send(make(ctx, prev, leg, alert))) {
      ctx.io.leg_broken(leg, "alert could not be paid for");
    }
    return;
  }
  const NeighborInfo* nb = ctx.view.neighbor(y);
  double ref = nb ? nb->latency_ms : 0.0;
  local_path_config(ctx, leg, std::nullopt, y, row.next_rank, ref);
}

}  // namespace

void trip_link(NodeContext& ctx, NodeId v) {
  const NeighborInfo* nb = ctx.view.neighbor(v);
  std::vector<LegKey> legs;
  for (const auto& [leg, row] : ctx.rows) {
    if (row.next == v && row.next_active) legs.push_back(leg);
  }
  if (legs.empty()) return;
  ctx.state.blocked[v] = nb ? nb->eps : 0.0;
  for (const auto& leg : legs) {
    if (ctx.io.torn_down(leg) || !ctx.rows.contains(leg)) continue;
    fail_outgoing(ctx, leg);
  }
}

void handle_alert(NodeContext& ctx, const LegKey& leg, const AlertMsg& msg) {
  auto it = ctx.rows.find(leg);
  if (it == ctx.rows.end() || it->second.next != msg.failed) {
    ctx.io.diagnostic("stale alert for " + to_string(leg) + " at node " + std::to_string(ctx.view.self.value));
    return;
  }
  it->second.next_active = false;
  double ref = std::numeric_limits<double>::infinity();
  if (const NeighborInfo* x = ctx.view.neighbor(msg.failed)) {
    if (const TwoHopLink* l = x->link_to(msg.failed_next)) ref = x->latency_ms + l->latency_ms;
  }
  local_path_config(ctx, leg, msg.failed, msg.failed_next, msg.next_rank, ref);
}

namespace {

void attempt_repair(NodeContext& ctx, const Repair& repair) {
  PathRow& row = ctx.rows.at(repair.leg);
  const int rate = ctx.io.piece(repair.leg.piece).rate;

  const NeighborInfo* best = nullptr;
  double best_life = -1.0;
  for (const auto& nb : ctx.view.neighbors) {
    if (!nb.alive || nb.id == repair.target || nb.id == repair.failed || is_blocked(ctx, nb.id)) continue;
    const TwoHopLink* to_target = nb.link_to(repair.target);
    if (!to_target) continue;
    if (nb.latency_ms + to_target->latency_ms > repair.reference_latency_ms) continue;
    double life = node_lifetime_from_load(nb.energy, nb.load + rate * to_target->eps, ctx.params.lifetime);
    if (!best || life > best_life) {
      best = &nb;
      best_life = life;
    }
  }
  if (!best) {
    local_aodv_plus(ctx, repair);
    return;
  }
  row.next = best->id;
  row.next_active = true;
  row.next_rank = (row.rank + repair.hi) / 2.0;
  send_or_break(ctx, best->id, repair.leg, JoinMsg{ctx.view.self, repair.target, row.rank, repair.hi, {}});
}

}  // namespace

void local_path_config(NodeContext& ctx, const LegKey& leg, std::optional<NodeId> failed, NodeId target,
                       double hi, double reference_latency_ms) {
  ctx.io.reconfigured(leg);
  attempt_repair(ctx, Repair{leg, failed, target, hi, reference_latency_ms, 0});
}

void join_path(NodeContext& ctx, const LegKey& leg, const JoinMsg& msg) {
  auto it = ctx.rows.find(leg);
  const NodeId self = ctx.view.self;
  const NodeId next_hop = msg.chain.empty() ? msg.downstream : msg.chain.front();

  if (it == ctx.rows.end()) {
    // (i) not on the path: plain insertion.
    const double m = static_cast<double>(msg.chain.size());
    const double rank = msg.lo + (msg.hi - msg.lo) / (m + 2.0);
    const double next_rank = msg.chain.empty() ? msg.hi : rank + (msg.hi - rank) / (m + 1.0);
    if (!(rank > msg.lo && next_rank > rank)) {
      ctx.io.leg_broken(leg, "rank space exhausted at node " + std::to_string(self.value));
      return;
    }
    ctx.rows[leg] = PathRow{msg.upstream, next_hop, rank, next_rank, true};
    if (msg.chain.empty()) {
      send_or_break(ctx, msg.downstream, leg, ModifyPathMsg{self, DeleteArg::No, DirArg::Fwd, rank, 0});
    } else {
      JoinMsg onward{self, msg.downstream, rank, msg.hi,
                     std::vector<NodeId>(msg.chain.begin() + 1, msg.chain.end())};
      send_or_break(ctx, msg.chain.front(), leg, std::move(onward));
    }
    return;
  }

  // A relay already on the leg is upstream of the requester and takes the
  // shortcut of case (iii), continuing the chain from itself.
  PathRow& row = it->second;
  if (row.rank > msg.lo && row.rank >= msg.hi) {
    if (!msg.chain.empty()) {
      ctx.io.leg_broken(leg, "route relay " + std::to_string(self.value) + " is downstream of the target");
      return;
    }
    // (ii) already downstream of the reconnection point: the stretch from
    // downstream up to here becomes a forward loop and is deleted.
    row.prev = msg.upstream;
    send_or_break(ctx, msg.downstream, leg,
                  ModifyPathMsg{self, DeleteArg::Yes, DirArg::Fwd, row.rank, new_wave(ctx)});
  } else if (row.rank < msg.lo) {
    // (iii) upstream of the requester: shortcut to downstream and delete
    // the stretch between here and the requester backwards.
    row.next = next_hop;
    row.next_active = true;
    if (msg.chain.empty()) {
      row.next_rank = msg.hi;
      if (!send_or_break(ctx, msg.downstream, leg, ModifyPathMsg{self, DeleteArg::No, DirArg::Fwd, row.rank, 0})) {
        return;
      }
    } else {
      const double m = static_cast<double>(msg.chain.size());
      row.next_rank = row.rank + (msg.hi - row.rank) / (m + 1.0);
      JoinMsg onward{self, msg.downstream, row.rank, msg.hi, std::vector<NodeId>(msg.chain.begin() + 1, msg.chain.end())};
      if (!send_or_break(ctx, next_hop, leg, std::move(onward))) return;
    }
    send_or_break(ctx, msg.upstream, leg, ModifyPathMsg{self, DeleteArg::Yes, DirArg::Bwd, row.rank, new_wave(ctx)});
  } else {
    ctx.io.leg_broken(leg, "joiner " + std::to_string(self.value) + " cannot place itself on the leg");
  }
}

void modify_path(NodeContext& ctx, const LegKey& leg, const ModifyPathMsg& msg) {
  const NodeId self = ctx.view.self;
  auto it = ctx.rows.find(leg);
  if (msg.del == DeleteArg::No) {
    if (it == ctx.rows.end()) {
      ctx.io.leg_broken(leg, "reconnection target " + std::to_string(self.value) + " left the leg");
      return;
    }
    if (msg.dir == DirArg::Fwd) {
      it->second.prev = msg.joiner;
    } else {
      it->second.next = msg.joiner;
      it->second.next_active = true;
    }
    return;
  }

  if (self == msg.joiner) return;
  if (!ctx.state.seen_waves.insert({leg, msg.wave}).second) return;
  if (it == ctx.rows.end()) {
    ctx.io.diagnostic("deletion wave for " + to_string(leg) + " hit a gap at node " + std::to_string(self.value));
    return;
  }
  const PieceInfo piece = ctx.io.piece(leg.piece);
  const bool endpoint = (leg.leg == Leg::Source && (self == piece.source || self == piece.proxy)) ||
                        (leg.leg == Leg::Consumer && (self == piece.proxy || self == piece.consumer));
  if (endpoint) {
    ctx.io.leg_broken(leg, "deletion wave reached a leg endpoint");
    return;
  }
  const PathRow row = it->second;
  std::optional<NodeId> onward;
  if (msg.dir == DirArg::Fwd) {
    if (row.rank > msg.joiner_rank || !row.next) {
      ctx.io.leg_broken(leg, "forward deletion wave missed its joiner");
      return;
    }
    onward = row.next;
  } else {
    if (row.rank < msg.joiner_rank || !row.prev) {
      ctx.io.leg_broken(leg, "backward deletion wave missed its joiner");
      return;
    }
    onward = row.prev;
  }
  ctx.rows.erase(it);
  ctx.io.wave_deactivation();
  if (*onward != msg.joiner) ctx.io.send(make(ctx, *onward, leg, msg));
}

namespace {

double repair_rank(const NodeContext& ctx, const LegKey& leg) {
  auto it = ctx.rows.find(leg);
  return it == ctx.rows.end() ? 0.0 : it->second.rank;
}

}  // namespace

void local_aodv_plus(NodeContext& ctx, const Repair& repair) {
  const LegKey& leg = repair.leg;
  const NodeId target = repair.target;
  const std::uint64_t request = ctx.state.next_request++;
  ctx.state.discoveries.push_back(
      Discovery{repair, request, ctx.io.cycle() + 2 * static_cast<std::uint64_t>(ctx.params.ttl) + 4});
  ctx.state.seen_requests.insert({ctx.view.self, request});
  for (const auto& nb : ctx.view.neighbors) {
    if (!nb.alive || is_blocked(ctx, nb.id)) continue;
    RouteRequestMsg rreq{ctx.view.self, target, request, ctx.params.ttl, kInfiniteLifetime, {ctx.view.self},
                         repair_rank(ctx, leg)};
    if (!ctx.io.send(make(ctx, nb.id, leg, std::move(rreq)))) break;
  }
}

void handle_route_request(NodeContext& ctx, const LegKey& leg, const RouteRequestMsg& msg) {
  const NodeId self = ctx.view.self;
  if (self == msg.target) {
    if (!ctx.rows.contains(leg)) return;
    auto& cols = ctx.state.collections;
    auto it = std::find_if(cols.begin(), cols.end(), [&](const Collection& c) {
      return c.leg == leg && c.origin == msg.origin && c.request == msg.request;
    });
    if (it == cols.end()) {
      cols.push_back(Collection{leg, msg.origin, msg.request, ctx.io.cycle() + 1, {}});
      it = cols.end() - 1;
    }
    std::vector<NodeId> route = msg.hops;
    route.push_back(self);
    it->candidates.push_back(Collection::Candidate{std::move(route), msg.min_lifetime});
    return;
  }
  if (msg.ttl <= 0) return;
  if (auto on_leg = ctx.rows.find(leg); on_leg != ctx.rows.end() && on_leg->second.rank >= msg.lo) return;
  if (std::find(msg.hops.begin(), msg.hops.end(), self) != msg.hops.end()) return;
  if (!ctx.state.seen_requests.insert({msg.origin, msg.request}).second) return;

  const int rate = ctx.io.piece(leg.piece).rate;
  const double energy = ctx.io.energy();
  for (const auto& nb : ctx.view.neighbors) {
    if (!nb.alive || is_blocked(ctx, nb.id)) continue;
    if (std::find(msg.hops.begin(), msg.hops.end(), nb.id) != msg.hops.end()) continue;
    RouteRequestMsg copy = msg;
    copy.ttl = msg.ttl - 1;
    copy.min_lifetime =
        std::min(msg.min_lifetime, node_lifetime_from_load(energy, ctx.view.load + rate * nb.eps, ctx.params.lifetime));
    copy.hops.push_back(self);
    if (!ctx.io.send(make(ctx, nb.id, leg, std::move(copy)))) break;
  }
}

void handle_route_reply(NodeContext& ctx, const LegKey& leg, const RouteReplyMsg& msg) {
  const NodeId self = ctx.view.self;
  auto pos = std::find(msg.route.begin(), msg.route.end(), self);
  if (pos == msg.route.end()) return;
  if (pos != msg.route.begin()) {
    ctx.io.send(make(ctx, *(pos - 1), leg, msg));
    return;
  }
  auto& ds = ctx.state.discoveries;
  auto d = std::find_if(ds.begin(), ds.end(),
                        [&](const Discovery& x) { return x.repair.leg == leg && x.request == msg.request; });
  if (d == ds.end()) return;
  const Discovery disc = *d;
  ds.erase(d);
  auto it = ctx.rows.find(leg);
  if (it == ctx.rows.end() || it->second.next_active) return;
  PathRow& row = it->second;
  const NodeId target = msg.route.back();
  const std::size_t relays = msg.route.size() - 2;
  row.next = msg.route[1];
  row.next_active = true;
  if (relays == 0) {
    row.next_rank = disc.repair.hi;
    send_or_break(ctx, target, leg, ModifyPathMsg{self, DeleteArg::No, DirArg::Fwd, row.rank, 0});
    return;
  }
  row.next_rank = row.rank + (disc.repair.hi - row.rank) / (static_cast<double>(relays) + 1.0);
  JoinMsg join{self, target, row.rank, disc.repair.hi, std::vector<NodeId>(msg.route.begin() + 2, msg.route.end() - 1)};
  send_or_break(ctx, msg.route[1], leg, std::move(join));
}

void disconnect(NodeContext& ctx) {
  std::vector<std::pair<LegKey, PathRow>> rows(ctx.rows.begin(), ctx.rows.end());
  ctx.rows.clear();
  for (const auto& [leg, row] : rows) {
    if (ctx.io.torn_down(leg)) continue;
    if (!row.prev || !row.next) {
      ctx.io.leg_broken(leg, "endpoint " + std::to_string(ctx.view.self.value) + " left the network");
      continue;
    }
    NodeId target = *row.next;
    double hi = row.next_rank;
    if (!row.next_active) {
      for (const auto& d : ctx.state.discoveries) {
        if (d.repair.leg == leg) {
          target = d.repair.target;
          hi = d.repair.hi;
        }
      }
      for (const auto& r : ctx.state.retries) {
        if (r.repair.leg == leg) {
          target = r.repair.target;
          hi = r.repair.hi;
        }
      }
    }
    Message m = make(ctx, *row.prev, leg, AlertMsg{ctx.view.self, target, row.rank, hi});
    m.last_gasp = true;
    ctx.io.send(std::move(m));
  }
  ctx.state.discoveries.clear();
  ctx.state.retries.clear();
  ctx.state.collections.clear();
  ctx.io.set_dead();
}

void node_cycle(NodeContext& ctx, std::span<const Message> inbox) {
  const auto& params = ctx.params;

  // Links whose interference has subsided become usable again.
  std::erase_if(ctx.state.blocked, [&](const auto& kv) {
    const NeighborInfo* nb = ctx.view.neighbor(kv.first);
    return !nb || nb->eps < kv.second;
  });

  // Trigger scan over active incident links.
  std::size_t active = 0;
  std::size_t triggered = 0;
  std::vector<NodeId> tripped;
  for (const auto& nb : ctx.view.neighbors) {
    bool out_active = false;
    bool in_active = false;
    for (const auto& [leg, row] : ctx.rows) {
      if (row.next == nb.id && row.next_active) out_active = true;
      if (row.prev == nb.id) in_active = true;
    }
    if (!out_active && !in_active) continue;
    ++active;
    if (nb.eps > 0.0 && trigger_check(nb.eps, nb.eps_prev, params.lifetime.gamma)) {
      ++triggered;
      if (out_active) tripped.push_back(nb.id);
    }
  }
  for (NodeId v : tripped) trip_link(ctx, v);

  for (const auto& m : inbox) {
    if (ctx.io.torn_down(m.leg) && !m.from_controller) continue;
    std::visit(
        [&](const auto& body) {
          using T = std::decay_t<decltype(body)>;
          if constexpr (std::is_same_v<T, AlertMsg>) handle_alert(ctx, m.leg, body);
          else if constexpr (std::is_same_v<T, JoinMsg>) join_path(ctx, m.leg, body);
          else if constexpr (std::is_same_v<T, ModifyPathMsg>) modify_path(ctx, m.leg, body);
          else if constexpr (std::is_same_v<T, RouteRequestMsg>) handle_route_request(ctx, m.leg, body);
          else if constexpr (std::is_same_v<T, RouteReplyMsg>) handle_route_reply(ctx, m.leg, body);
        },
        m.body);
  }

  // Route collections whose window closed answer with the best route.
  const std::uint64_t now = ctx.io.cycle();
  std::vector<Collection> ready;
  std::erase_if(ctx.state.collections, [&](Collection& c) {
    if (c.deadline > now) return false;
    ready.push_back(std::move(c));
    return true;
  });
  for (auto& c : ready) {
    if (!ctx.rows.contains(c.leg) || c.candidates.empty()) continue;
    auto best = std::min_element(c.candidates.begin(), c.candidates.end(),
                                 [](const Collection::Candidate& a, const Collection::Candidate& b) {
                                   if (a.min_lifetime != b.min_lifetime) return a.min_lifetime > b.min_lifetime;
                                   if (a.route.size() != b.route.size()) return a.route.size() < b.route.size();
                                   return a.route < b.route;
                                 });
    NodeId back = best->route[best->route.size() - 2];
    ctx.io.send(make(ctx, back, c.leg, RouteReplyMsg{c.request, best->route}));
  }

  // A discovery nobody answered in time is retried later with exponential
  // back-off; the leg loses its traffic meanwhile.
  const auto still_waiting = [&](const Repair& r) {
    if (ctx.io.torn_down(r.leg)) return false;
    auto it = ctx.rows.find(r.leg);
    return it != ctx.rows.end() && !it->second.next_active;
  };
  std::erase_if(ctx.state.discoveries, [&](const Discovery& d) {
    if (d.deadline > now) return false;
    if (still_waiting(d.repair)) {
      ctx.io.discovery_failed(d.repair);
      const std::uint64_t base = 2 * static_cast<std::uint64_t>(ctx.params.ttl) + 4;
      const std::uint64_t wait = std::min(params.retry_cap, base << std::min(d.repair.attempt, 20));
      Repair next = d.repair;
      ++next.attempt;
      ctx.state.retries.push_back(Retry{next, now + wait});
    }
    return true;
  });
  std::vector<Repair> due;
  std::erase_if(ctx.state.retries, [&](const Retry& r) {
    if (r.at > now) return false;
    if (still_waiting(r.repair)) due.push_back(r.repair);
    return true;
  });
  for (const auto& r : due) {
    if (still_waiting(r)) attempt_repair(ctx, r);
  }

  if (ctx.io.energy() <= 0.0 || (active >= 2 && 2 * triggered > active)) disconnect(ctx);
}

// ---------------------------------------------------------------------------
// Runtime

class ProtocolRuntime::Io final : public NodeIo {
 public:
  Io(ProtocolRuntime& rt, NodeId self, std::uint64_t cycle) : rt_(rt), self_(self), cycle_(cycle) {}

  bool send(Message m) override {
    m.src = self_;
    auto& net = rt_.net_;
    if (!net.has_link(self_, m.dst)) throw std::logic_error("message to a non-neighbor");
    const double cost = net.link(self_, m.dst).eps;
    const double energy = net.node(self_).energy;
    if (m.last_gasp) {
      if (energy > 0.0) rt_.ledger_.charge(net, self_, std::min(cost, energy), EnergyKind::Config);
    } else if (!rt_.ledger_.charge(net, self_, cost, EnergyKind::Config)) {
      ++rt_.stats_.dropped;
      return false;
    }
    auto& st = rt_.stats_;
    ++st.messages;
    std::visit(
        [&](const auto& body) {
          using T = std::decay_t<decltype(body)>;
          if constexpr (std::is_same_v<T, AlertMsg>) ++st.alerts;
          else if constexpr (std::is_same_v<T, JoinMsg>) ++st.joins;
          else if constexpr (std::is_same_v<T, ModifyPathMsg>) {
            ++st.modifies;
            if (body.del == DeleteArg::Yes && body.joiner != self_) ++st.modify_forwards;
          } else if constexpr (std::is_same_v<T, RouteRequestMsg>) ++st.route_requests;
          else if constexpr (std::is_same_v<T, RouteReplyMsg>) ++st.route_replies;
        },
        m.body);
    if (rt_.trace_enabled_) rt_.trace_.push_back(trace_line(cycle_, m));
    rt_.outgoing_.push_back(std::move(m));
    return true;
  }

  double energy() const override { return rt_.net_.node(self_).energy; }
  std::uint64_t cycle() const override { return cycle_; }

  PieceInfo piece(PieceId id) const override {
    for (const auto& p : rt_.pieces_) {
      if (p.id == id) return PieceInfo{p.source, p.consumer, p.proxy, p.rate};
    }
    throw std::logic_error("unknown piece " + std::to_string(id));
  }

  void leg_broken(const LegKey& leg, const std::string& why) override {
    rt_.note(to_string(leg) + " broken: " + why);
    rt_.mark_broken(leg);
  }

  void reconfigured(const LegKey&) override {
    ++rt_.step_reconfigs_;
    ++rt_.stats_.reconfigs;
  }

  void discovery_failed(const Repair& repair) override {
    rt_.note(to_string(repair.leg) + ": no route from " + std::to_string(self_.value) + " to " +
             std::to_string(repair.target.value) + " (attempt " + std::to_string(repair.attempt + 1) + ")");
    ++rt_.stats_.failed_discoveries;
  }

  void set_dead() override {
    auto& n = rt_.net_.node(self_);
    if (!n.alive) return;
    n.alive = false;
    rt_.step_dead_.push_back(self_);
  }

  void diagnostic(const std::string& what) override { rt_.note(what); }
  void wave_deactivation() override { ++rt_.stats_.wave_deactivations; }
  bool torn_down(const LegKey& leg) const override { return rt_.table_.broken(leg); }

 private:
  ProtocolRuntime& rt_;
  NodeId self_;
  std::uint64_t cycle_;
};

ProtocolRuntime::ProtocolRuntime(NetworkState& net, PathTable& table, std::vector<DataPiece>& pieces,
                                 EnergyLedger& ledger, ProtocolParams params)
    : net_(net), table_(table), pieces_(pieces), ledger_(ledger), params_(params), states_(net.size()) {}

LocalView ProtocolRuntime::view_of(NodeId u) const {
  LocalView view{u, node_load(net_, table_, pieces_, u), {}};
  for (NodeId v : net_.neighbors(u)) {
    const auto& nv = net_.node(v);
    const auto& l = net_.link(u, v);
    NeighborInfo info{v, nv.alive, nv.energy, node_load(net_, table_, pieces_, v), l.latency_ms, l.eps, l.eps_prev, {}};
    for (NodeId w : net_.neighbors(v)) {
      const auto& vw = net_.link(v, w);
      info.links.push_back(TwoHopLink{w, vw.latency_ms, vw.eps});
    }
    view.neighbors.push_back(std::move(info));
  }
  return view;
}

template <class F>
void ProtocolRuntime::with_node(NodeId u, std::uint64_t cycle, F&& f) {
  LocalView view = view_of(u);
  Io io(*this, u, cycle);
  NodeContext ctx{view, table_.rows(u), states_.at(u.index()), io, params_};
  f(ctx);
}

void ProtocolRuntime::step(std::uint64_t cycle) {
  step_reconfigs_ = 0;
  step_dead_.clear();
  std::vector<std::vector<Message>> inbox(net_.size());
  for (auto& m : in_flight_) inbox[m.dst.index()].push_back(std::move(m));
  in_flight_.clear();

  for (const auto& n : net_.nodes()) {
    auto& box = inbox[n.id.index()];
    if (!n.alive) {
      stats_.dropped += box.size();
      continue;
    }
    with_node(n.id, cycle, [&](NodeContext& ctx) { node_cycle(ctx, box); });
  }
  flush();
  sweep();
}

void ProtocolRuntime::flush() {
  for (auto& m : outgoing_) {
    if (!table_.broken(m.leg)) in_flight_.push_back(std::move(m));
  }
  outgoing_.clear();
}

bool ProtocolRuntime::quiescent() const {
  if (!in_flight_.empty()) return false;
  return std::all_of(states_.begin(), states_.end(), [](const NodeProtocolState& s) {
    return s.discoveries.empty() && s.collections.empty();
  });
}

void ProtocolRuntime::disconnect_now(NodeId u, std::uint64_t cycle) {
  if (!net_.node(u).alive) return;
  with_node(u, cycle, [](NodeContext& ctx) { disconnect(ctx); });
  flush();
}

void ProtocolRuntime::fail_link_now(NodeId u, NodeId v, std::uint64_t cycle) {
  if (!net_.node(u).alive) return;
  with_node(u, cycle, [v](NodeContext& ctx) { trip_link(ctx, v); });
  flush();
}

std::vector<std::string> ProtocolRuntime::take_trace() {
  std::vector<std::string> out;
  out.swap(trace_);
  return out;
}

void ProtocolRuntime::trace_external(const Message& m, std::uint64_t cycle) {
  if (trace_enabled_) trace_.push_back(trace_line(cycle, m));
}

void ProtocolRuntime::note(std::string what) {
  if (diagnostics_.size() < kMaxDiagnostics) diagnostics_.push_back(std::move(what));
}

void ProtocolRuntime::mark_broken(const LegKey& leg) {
  if (table_.broken(leg)) return;
  table_.clear_leg(leg);
  table_.mark_broken(leg);
  ++stats_.broken_legs;
  std::erase_if(in_flight_, [&](const Message& m) { return m.leg == leg && !m.from_controller; });
  for (auto& s : states_) {
    std::erase_if(s.discoveries, [&](const Discovery& d) { return d.repair.leg == leg; });
    std::erase_if(s.retries, [&](const Retry& r) { return r.repair.leg == leg; });
    std::erase_if(s.collections, [&](const Collection& c) { return c.leg == leg; });
  }
}

bool ProtocolRuntime::leg_busy(const LegKey& leg) const {
  for (const auto& m : in_flight_) {
    if (m.leg == leg && !m.from_controller && !m.to_controller) return true;
  }
  for (const auto& s : states_) {
    for (const auto& d : s.discoveries) {
      if (d.repair.leg == leg) return true;
    }
    for (const auto& c : s.collections) {
      if (c.leg == leg) return true;
    }
  }
  return false;
}

// Rows no longer reachable from either end of a settled leg are soft state
// that would otherwise expire; drop them.
void ProtocolRuntime::sweep() {
  std::vector<char> keep(net_.size());
  for (const auto& piece : pieces_) {
    if (!piece.proxy) continue;
    for (Leg l : {Leg::Source, Leg::Consumer}) {
      LegKey key{piece.id, l};
      if (table_.broken(key) || leg_busy(key)) continue;
      std::fill(keep.begin(), keep.end(), 0);
      for (NodeId cur = leg_start(piece, l);;) {
        const PathRow* r = table_.find(key, cur);
        if (!r || keep[cur.index()]) break;
        keep[cur.index()] = 1;
        if (!r->next) break;
        cur = *r->next;
      }
      for (NodeId cur = leg_end(piece, l);;) {
        const PathRow* r = table_.find(key, cur);
        if (!r || keep[cur.index()] == 2) break;
        keep[cur.index()] = 2;
        if (!r->prev) break;
        cur = *r->prev;
      }
      for (const auto& n : net_.nodes()) {
        if (!keep[n.id.index()] && table_.find(key, n.id)) table_.erase(key, n.id);
      }
    }
  }
}

}  // namespace iiotfwd
