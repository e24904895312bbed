#include "engine.hpp"

#include <algorithm>
#include <cmath>

namespace iiotfwd {

InterferenceModel::InterferenceModel(InterferenceParams params, std::uint64_t seed) : params_(params) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x72u};
  rng_.seed(seq);
}

std::vector<std::pair<NodeId, NodeId>> InterferenceModel::step(NetworkState& net, std::uint64_t cycle) {
  for (auto it = raised_.begin(); it != raised_.end();) {
    if (it->second <= cycle) {
      auto& l = net.link(it->first.first, it->first.second);
      l.eps = l.base_eps;
      it = raised_.erase(it);
    } else {
      ++it;
    }
  }

  std::vector<std::pair<NodeId, NodeId>> hit;
  std::bernoulli_distribution event(params_.event_probability);
  if (!event(rng_)) return hit;
  ++events_;

  std::vector<std::pair<NodeId, NodeId>> links;
  for (const auto& n : net.nodes()) {
    for (NodeId v : net.neighbors(n.id)) links.emplace_back(n.id, v);
  }
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(params_.affected_edges), links.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, links.size() - 1);
    std::swap(links[i], links[pick(rng_)]);
    const auto key = links[i];
    const std::uint64_t until = cycle + static_cast<std::uint64_t>(params_.duration_cycles);
    auto [it, fresh] = raised_.try_emplace(key, until);
    if (fresh) {
      auto& l = net.link(key.first, key.second);
      l.eps = l.base_eps * params_.multiplier;
    } else {
      it->second = std::max(it->second, until);
    }
    hit.push_back(key);
  }
  return hit;
}

std::optional<double> sample_access_latency(const NetworkState& net, const PathTable& table,
                                            const DataPiece& piece) {
  if (!piece.proxy) return std::nullopt;
  const LegKey key{piece.id, Leg::Consumer};
  if (table.broken(key)) return std::nullopt;
  NodeId cur = *piece.proxy;
  if (!net.node(cur).alive || !net.node(piece.consumer).alive) return std::nullopt;
  std::vector<bool> seen(net.size(), false);
  seen[cur.index()] = true;
  while (cur != piece.consumer) {
    const PathRow* r = table.find(key, cur);
    if (!r || !r->next || !r->next_active) return std::nullopt;
    NodeId nxt = *r->next;
    if (!net.has_link(cur, nxt) || !net.node(nxt).alive || seen[nxt.index()]) return std::nullopt;
    seen[nxt.index()] = true;
    cur = nxt;
  }
  return access_latency(net, table, piece);
}

// ---------------------------------------------------------------------------

namespace {

InterferenceParams interference_params(const ScenarioConfig& cfg) {
  return InterferenceParams{cfg.event_probability, cfg.multiplier, cfg.affected_edges, cfg.duration_cycles};
}

ProtocolParams protocol_params(const ScenarioConfig& cfg) {
  return ProtocolParams{LifetimeParams{cfg.e_cfg(), cfg.tau_s, cfg.gamma}, cfg.ttl};
}

}  // namespace

Simulation::Simulation(const ScenarioConfig& cfg, Strategy strategy, std::uint64_t seed, RunOptions opts)
    : Simulation(instantiate(cfg, seed), cfg, strategy, seed, opts) {}

Simulation::Simulation(ScenarioInstance instance, const ScenarioConfig& cfg, Strategy strategy,
                       std::uint64_t seed, RunOptions opts)
    : cfg_(cfg),
      strategy_(strategy),
      seed_(seed),
      opts_(opts),
      lifetime_{cfg.e_cfg(), cfg.tau_s, cfg.gamma},
      net_(std::move(instance.net)),
      pieces_(std::move(instance.pieces)),
      table_(net_.size()),
      ledger_(net_.size()),
      interference_(interference_params(cfg), seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x73u};
  requests_rng_.seed(seq);
  if (opts_.audit) ledger_.enable_log();
  for (const auto& d : cfg.forced_deaths) forced_[d.cycle].push_back(d.node);
  if (strategy_ == Strategy::DistrDataFwd) {
    runtime_ = std::make_unique<ProtocolRuntime>(net_, table_, pieces_, ledger_, protocol_params(cfg));
    if (opts_.trace) runtime_->enable_trace();
  }
  metrics_.strategy = strategy;
  metrics_.seed = seed;
  metrics_.scenario = cfg.name;
}

void Simulation::configure() {
  if (configured_) return;
  configured_ = true;
  std::size_t charged = 0;
  for (const auto& n : net_.nodes()) {
    if (!n.alive) continue;
    ledger_.charge(net_, n.id, net_.eps_cc(), EnergyKind::Config);
    ++charged;
    if (opts_.trace) metrics_.trace.push_back("0 status " + std::to_string(n.id.value) + " C -");
  }
  auto status = collect_status(net_);
  Plan plan = plan_pieces(status, net_.size(), net_.proxies(), pieces_, cfg_.l_max_ms, lifetime_);
  install_plan(plan, pieces_, table_);
  metrics_.unplanned_at_start = plan.infeasible.size() + plan.skipped.size();
  if (opts_.trace) {
    for (const auto& s : status) metrics_.trace.push_back("0 plan C " + std::to_string(s.node.value) + " -");
  }
  metrics_.initial_j_max = max_epoch_duration(net_, table_, pieces_, lifetime_);
  (void)charged;
  record(0.0);
}

void Simulation::lose(std::uint64_t count, LossCause cause) {
  if (count == 0) return;
  lost_ += count;
  metrics_.loss_by_cause[static_cast<std::size_t>(cause)] += count;
}

// Pushes `count` pieces down one leg. Returns how many reach its end.
std::uint64_t Simulation::forward_leg(const DataPiece& piece, Leg leg, std::uint64_t count) {
  const LegKey key{piece.id, leg};
  const NodeId end = leg_end(piece, leg);
  NodeId cur = leg_start(piece, leg);
  std::vector<bool> seen(net_.size(), false);
  seen[cur.index()] = true;
  while (cur != end) {
    const PathRow* r = table_.find(key, cur);
    if (!r || !r->next) {
      lose(count, LossCause::PathGap);
      return 0;
    }
    if (!r->next_active) {
      lose(count, LossCause::LinkDown);
      return 0;
    }
    const NodeId nxt = *r->next;
    if (!net_.has_link(cur, nxt)) {
      lose(count, LossCause::PathGap);
      return 0;
    }
    if (!net_.node(nxt).alive) {
      lose(count, LossCause::NodeDead);
      return 0;
    }
    if (seen[nxt.index()]) {
      lose(count, LossCause::Loop);
      return 0;
    }
    seen[nxt.index()] = true;
    const double eps = net_.link(cur, nxt).eps;
    const double energy = net_.node(cur).energy;
    std::uint64_t sent = count;
    if (energy < eps * static_cast<double>(count)) {
      sent = static_cast<std::uint64_t>(std::floor(energy / eps));
      sent = std::min(sent, count);
    }
    ledger_.charge(net_, cur, eps * static_cast<double>(count), EnergyKind::Data);
    lose(count - sent, LossCause::Energy);
    count = sent;
    if (count == 0) return 0;
    cur = nxt;
  }
  return count;
}

void Simulation::forward_all() {
  for (const auto& piece : pieces_) {
    if (!net_.node(piece.source).alive || piece.rate <= 0) continue;
    const auto count = static_cast<std::uint64_t>(piece.rate);
    generated_ += count;
    if (!net_.node(piece.consumer).alive || (piece.proxy && !net_.node(*piece.proxy).alive)) {
      lose(count, LossCause::EndpointDead);
      continue;
    }
    if (!piece.proxy) {
      lose(count, LossCause::NoPlan);
      continue;
    }
    std::uint64_t at_proxy = forward_leg(piece, Leg::Source, count);
    if (at_proxy == 0) continue;
    delivered_ += forward_leg(piece, Leg::Consumer, at_proxy);
  }
}

void Simulation::serve_requests() {
  std::bernoulli_distribution asks(cfg_.request_probability);
  cycle_max_latency_ = 0.0;
  for (const auto& piece : pieces_) {
    const bool wants = asks(requests_rng_);
    if (!wants || !net_.node(piece.consumer).alive) continue;
    ++metrics_.requests;
    auto latency = sample_access_latency(net_, table_, piece);
    if (!latency) {
      ++metrics_.misses;
      continue;
    }
    cycle_max_latency_ = std::max(cycle_max_latency_, *latency);
    metrics_.max_latency_ms = std::max(metrics_.max_latency_ms, *latency);
    if (*latency > cfg_.l_max_ms) ++metrics_.latency_violations;
  }
}

bool Simulation::central_trigger() const {
  for (const auto& n : net_.nodes()) {
    if (!n.alive) continue;
    for (NodeId v : net_.neighbors(n.id)) {
      if (table_.active_legs(n.id, v).empty()) continue;
      const auto& l = net_.link(n.id, v);
      if (trigger_check(l.eps, l.eps_prev, cfg_.gamma)) return true;
    }
  }
  return false;
}

void Simulation::record(double max_latency) {
  CycleRecord r;
  r.cycle = cycle_;
  r.energy_data_j = ledger_.data_total();
  r.energy_cfg_j = ledger_.config_total();
  r.generated = generated_;
  r.delivered = delivered_;
  r.lost = lost_;
  r.in_transit = 0;  // pieces finish their route inside the generating cycle
  r.max_latency_ms = max_latency;
  r.reconfigs = reconfigs_;
  r.alive_nodes = net_.alive_count();
  if (r.generated != r.delivered + r.lost + r.in_transit) ++metrics_.conservation_failures;
  metrics_.series.push_back(r);
}

void Simulation::step() {
  if (!configured_) configure();
  if (done()) return;
  ++cycle_;
  const std::uint64_t t = cycle_;
  std::vector<bool> alive_before(net_.size());
  for (const auto& n : net_.nodes()) alive_before[n.id.index()] = n.alive;

  net_.roll_eps();
  interference_.step(net_, t);
  if (auto it = forced_.find(t); it != forced_.end()) {
    for (NodeId u : it->second) net_.node(u).energy = 0.0;
  }

  forward_all();

  const std::uint64_t reconfigs_before = reconfigs_;
  if (runtime_) {
    runtime_->step(t);
    reconfigs_ += runtime_->reconfigs_in_last_step();
    if (opts_.trace) {
      for (auto& line : runtime_->take_trace()) metrics_.trace.push_back(std::move(line));
    }
  } else {
    for (const auto& n : net_.nodes()) {
      if (n.alive && n.energy <= 0.0) net_.node(n.id).alive = false;
    }
  }

  bool died = false;
  for (const auto& n : net_.nodes()) {
    if (alive_before[n.id.index()] && !n.alive) {
      metrics_.deaths.emplace_back(n.id, t);
      died = true;
    }
  }

  serve_requests();

  if (strategy_ == Strategy::PddCr && (died || central_trigger()) && net_.alive_count() > 0) {
    Recomputation rc = recompute_central(net_, ledger_, pieces_, cfg_.l_max_ms, lifetime_);
    install_plan(rc.plan, pieces_, table_);
    ++metrics_.recomputations;
    ++reconfigs_;
    if (opts_.trace) {
      const std::string c = std::to_string(t);
      for (const auto& n : net_.nodes()) {
        if (n.alive) metrics_.trace.push_back(c + " status " + std::to_string(n.id.value) + " C -");
      }
      for (const auto& n : net_.nodes()) {
        if (n.alive) metrics_.trace.push_back(c + " plan C " + std::to_string(n.id.value) + " -");
      }
    }
  }
  if (reconfigs_ > reconfigs_before) metrics_.epoch_boundaries.push_back(t);

  record(cycle_max_latency_);
}

Metrics Simulation::run() {
  configure();
  while (!done()) step();
  metrics_.interference_events = interference_.events();
  if (runtime_) metrics_.protocol = runtime_->stats();
  return metrics_;
}

Metrics run_simulation(const ScenarioConfig& cfg, Strategy strategy, std::uint64_t seed, RunOptions opts) {
  if (auto findings = validate_scenario(cfg); !findings.empty()) {
    throw ScenarioError(0, findings.front().field, findings.front().message);
  }
  Simulation sim(cfg, strategy, seed, opts);
  return sim.run();
}

}  // namespace iiotfwd
