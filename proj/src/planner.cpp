#include "planner.hpp"

#include <algorithm>
#include <queue>
#include <tuple>

namespace iiotfwd {

std::vector<StatusReport> collect_status(const NetworkState& net) {
  std::vector<StatusReport> out;
  for (const auto& n : net.nodes()) {
    if (!n.alive || n.energy <= 0.0) continue;
    StatusReport s{n.id, n.energy, {}};
    for (NodeId v : net.neighbors(n.id)) {
      const auto& l = net.link(n.id, v);
      s.links.push_back(LinkStatus{v, l.eps, l.latency_ms});
    }
    out.push_back(std::move(s));
  }
  return out;
}

PlannerView::PlannerView(std::span<const StatusReport> status, std::size_t node_count)
    : energy_(node_count, 0.0), present_(node_count, false), arcs_(node_count) {
  for (const auto& s : status) {
    energy_.at(s.node.index()) = s.energy;
    present_.at(s.node.index()) = true;
  }
  for (const auto& s : status) {
    for (const auto& l : s.links) {
      if (l.to.index() >= node_count || !present_[l.to.index()]) continue;
      arcs_[s.node.index()].push_back(Arc{l.to, l.eps, l.latency_ms, l.latency_ms});
    }
  }
  for (std::size_t u = 0; u < node_count; ++u) {
    auto& arcs = arcs_[u];
    std::sort(arcs.begin(), arcs.end(), [](const Arc& a, const Arc& b) { return a.to < b.to; });
    for (auto& a : arcs) {
      if (const Arc* back = arc(a.to, NodeId{static_cast<std::uint32_t>(u)})) {
        a.round_trip_ms = a.latency_ms + back->latency_ms;
      } else {
        a.round_trip_ms = 2.0 * a.latency_ms;
      }
    }
  }
}

const PlannerView::Arc* PlannerView::arc(NodeId u, NodeId v) const {
  const auto& arcs = arcs_.at(u.index());
  auto it = std::lower_bound(arcs.begin(), arcs.end(), v, [](const Arc& a, NodeId id) { return a.to < id; });
  return it != arcs.end() && it->to == v ? &*it : nullptr;
}

namespace {

struct Label {
  double latency;
  double bottleneck;
  std::size_t hops;
  std::vector<NodeId> path;
  bool dead = false;
};

// a is at least as good as b on every criterion of the final ordering, and
// every extension preserves that.
bool dominates(const Label& a, const Label& b) {
  return a.latency <= b.latency && a.bottleneck >= b.bottleneck && a.hops <= b.hops && a.path <= b.path;
}

bool better_final(const Label& a, const Label& b) {
  if (a.bottleneck != b.bottleneck) return a.bottleneck > b.bottleneck;
  if (a.hops != b.hops) return a.hops < b.hops;
  return a.path < b.path;
}

}  // namespace

std::optional<PathChoice> bottleneck_path(const PlannerView& view, const PathQuery& query,
                                          std::span<const double> load, const LifetimeParams& params) {
  if (query.from == query.to) throw std::invalid_argument("bottleneck_path needs distinct endpoints");
  if (!view.present(query.from) || !view.present(query.to)) return std::nullopt;

  std::vector<Label> labels;
  std::vector<std::vector<std::size_t>> at(view.size());
  using Entry = std::tuple<double, std::size_t, std::size_t>;  // latency, hops, label
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;

  labels.push_back(Label{0.0, kInfiniteLifetime, 0, {query.from}});
  at[query.from.index()].push_back(0);
  open.emplace(0.0, 0, 0);

  while (!open.empty()) {
    auto [lat, hops, idx] = open.top();
    open.pop();
    if (labels[idx].dead) continue;
    NodeId u = labels[idx].path.back();
    if (u == query.to) continue;
    double lifetime_base = load[u.index()];
    for (const auto& arc : view.arcs(u)) {
      const auto& cur = labels[idx];
      if (std::find(cur.path.begin(), cur.path.end(), arc.to) != cur.path.end()) continue;
      double step = query.round_trip ? arc.round_trip_ms : arc.latency_ms;
      Label next{cur.latency + step,
                 std::min(cur.bottleneck,
                          node_lifetime_from_load(view.energy(u), lifetime_base + arc.eps * query.rate, params)),
                 cur.hops + 1, cur.path};
      if (next.latency > query.budget_ms) continue;
      next.path.push_back(arc.to);

      auto& bucket = at[arc.to.index()];
      bool dominated = std::any_of(bucket.begin(), bucket.end(),
                                   [&](std::size_t k) { return dominates(labels[k], next); });
      if (dominated) continue;
      for (std::size_t k : bucket) {
        if (dominates(next, labels[k])) labels[k].dead = true;
      }
      std::erase_if(bucket, [&](std::size_t k) { return labels[k].dead; });
      labels.push_back(std::move(next));
      std::size_t id = labels.size() - 1;
      bucket.push_back(id);
      open.emplace(labels[id].latency, labels[id].hops, id);
    }
  }

  const Label* best = nullptr;
  for (std::size_t k : at[query.to.index()]) {
    if (!best || better_final(labels[k], *best)) best = &labels[k];
  }
  if (!best) return std::nullopt;
  return PathChoice{best->path, best->bottleneck, best->latency};
}

// ---------------------------------------------------------------------------

const PlanEntry* Plan::find(PieceId piece) const {
  auto it = std::find_if(entries.begin(), entries.end(), [&](const PlanEntry& e) { return e.piece == piece; });
  return it == entries.end() ? nullptr : &*it;
}

nlohmann::json Plan::to_json() const {
  nlohmann::json doc;
  auto hops = [](const std::vector<NodeId>& path) {
    auto arr = nlohmann::json::array();
    for (NodeId n : path) arr.push_back(n.value);
    return arr;
  };
  auto& list = doc["pieces"] = nlohmann::json::array();
  for (const auto& e : entries) {
    list.push_back({{"piece", e.piece},
                    {"proxy", e.proxy.value},
                    {"source_path", hops(e.source_path)},
                    {"consumer_path", hops(e.consumer_path)},
                    {"round_trip_ms", e.round_trip_ms}});
  }
  doc["infeasible"] = infeasible;
  doc["skipped"] = skipped;
  return doc;
}

namespace {

std::optional<PathChoice> leg_route(const PlannerView& view, NodeId from, NodeId to, double budget,
                                    double rate, bool round_trip, std::span<const double> load,
                                    const LifetimeParams& params) {
  if (from == to) return PathChoice{{from}, kInfiniteLifetime, 0.0};
  return bottleneck_path(view, PathQuery{from, to, budget, rate, round_trip}, load, params);
}

void add_route_load(const PlannerView& view, const std::vector<NodeId>& hops, double rate,
                    std::vector<double>& load) {
  for (std::size_t k = 0; k + 1 < hops.size(); ++k) {
    load[hops[k].index()] += view.arc(hops[k], hops[k + 1])->eps * rate;
  }
}

double network_min_lifetime(const PlannerView& view, const std::vector<double>& load,
                            const LifetimeParams& params) {
  double best = kInfiniteLifetime;
  for (std::size_t u = 0; u < load.size(); ++u) {
    if (load[u] <= 0.0) continue;
    best = std::min(best, node_lifetime_from_load(view.energy(NodeId{static_cast<std::uint32_t>(u)}), load[u], params));
  }
  return best;
}

}  // namespace

Plan plan_pieces(std::span<const StatusReport> status, std::size_t node_count,
                 std::span<const NodeId> proxies, std::span<const DataPiece> pieces, double l_max_ms,
                 const LifetimeParams& params) {
  if (!(l_max_ms > 0.0)) throw std::invalid_argument("L_max must be positive");
  PlannerView view(status, node_count);
  std::vector<double> load(node_count, 0.0);
  Plan plan;

  std::vector<const DataPiece*> order;
  for (const auto& p : pieces) order.push_back(&p);
  std::stable_sort(order.begin(), order.end(), [](const DataPiece* a, const DataPiece* b) {
    if (a->rate != b->rate) return a->rate > b->rate;
    return a->id < b->id;
  });
  std::vector<NodeId> sorted_proxies(proxies.begin(), proxies.end());
  std::sort(sorted_proxies.begin(), sorted_proxies.end());

  for (const DataPiece* piece : order) {
    if (!view.present(piece->source) || !view.present(piece->consumer)) {
      plan.skipped.push_back(piece->id);
      continue;
    }
    std::optional<PlanEntry> best;
    double best_score = -1.0;
    std::size_t best_hops = 0;
    for (NodeId p : sorted_proxies) {
      if (!view.present(p)) continue;
      auto src = leg_route(view, piece->source, p, kInfiniteLifetime, piece->rate, false, load, params);
      if (!src) continue;
      std::vector<double> projected = load;
      add_route_load(view, src->hops, piece->rate, projected);
      auto con = leg_route(view, p, piece->consumer, l_max_ms, piece->rate, true, projected, params);
      if (!con) continue;
      add_route_load(view, con->hops, piece->rate, projected);
      double score = network_min_lifetime(view, projected, params);
      std::size_t hops = src->hops.size() + con->hops.size();
      if (!best || score > best_score || (score == best_score && hops < best_hops)) {
        best = PlanEntry{piece->id, p, src->hops, con->hops, con->latency_ms, std::min(src->bottleneck, con->bottleneck)};
        best_score = score;
        best_hops = hops;
      }
    }
    if (!best) {
      plan.infeasible.push_back(piece->id);
      continue;
    }
    add_route_load(view, best->source_path, piece->rate, load);
    add_route_load(view, best->consumer_path, piece->rate, load);
    plan.entries.push_back(std::move(*best));
  }
  std::sort(plan.entries.begin(), plan.entries.end(),
            [](const PlanEntry& a, const PlanEntry& b) { return a.piece < b.piece; });
  std::sort(plan.infeasible.begin(), plan.infeasible.end());
  std::sort(plan.skipped.begin(), plan.skipped.end());
  return plan;
}

Plan compute_plan(std::span<const StatusReport> status, std::size_t node_count,
                  std::span<const NodeId> proxies, std::span<const DataPiece> pieces, double l_max_ms,
                  const LifetimeParams& params) {
  Plan plan = plan_pieces(status, node_count, proxies, pieces, l_max_ms, params);
  if (!plan.infeasible.empty()) {
    PieceId p = plan.infeasible.front();
    throw PlanningError(p, "no route for piece " + std::to_string(p) + " meets the " +
                               std::to_string(l_max_ms) + " ms access latency bound");
  }
  return plan;
}

void install_plan(const Plan& plan, std::vector<DataPiece>& pieces, PathTable& table) {
  table.clear();
  for (auto& piece : pieces) {
    const PlanEntry* e = plan.find(piece.id);
    if (!e) {
      piece.proxy.reset();
      continue;
    }
    piece.proxy = e->proxy;
    table.install(LegKey{piece.id, Leg::Source}, e->source_path);
    table.install(LegKey{piece.id, Leg::Consumer}, e->consumer_path);
  }
}

Recomputation recompute_central(NetworkState& net, EnergyLedger& ledger,
                                std::span<const DataPiece> pieces, double l_max_ms,
                                const LifetimeParams& params) {
  Recomputation out;
  for (const auto& n : net.nodes()) {
    if (!n.alive) continue;
    double before = n.energy;
    ledger.charge(net, n.id, net.eps_cc(), EnergyKind::Config);
    out.joules_charged += before - net.node(n.id).energy;
    ++out.nodes_charged;
  }
  if (out.nodes_charged == 0) return out;
  auto status = collect_status(net);
  out.plan = plan_pieces(status, net.size(), net.proxies(), pieces, l_max_ms, params);
  return out;
}

}  // namespace iiotfwd
