#include "lifetime.hpp"

#include <algorithm>
#include <stdexcept>

namespace iiotfwd {

double node_lifetime_from_load(double energy, double joules_per_cycle, const LifetimeParams& params) {
  if (energy <= 0.0) return 0.0;
  if (energy <= params.e_cfg) return 1.0;
  if (joules_per_cycle <= 0.0) return kInfiniteLifetime;
  return energy / joules_per_cycle;
}

double node_lifetime(double energy, const RateVector& rates, const std::map<NodeId, double>& eps_per_link,
                     const LifetimeParams& params) {
  if (rates.size() != eps_per_link.size()) {
    throw std::invalid_argument("rate vector and eps map cover different links");
  }
  double load = 0.0;
  for (const auto& [v, a] : rates) {
    auto it = eps_per_link.find(v);
    if (it == eps_per_link.end()) throw std::invalid_argument("no eps for link to " + std::to_string(v.value));
    load += it->second * a;
  }
  return node_lifetime_from_load(energy, load, params);
}

RateVector aggregate_rates(const PathTable& table, std::span<const DataPiece> pieces, NodeId u) {
  RateVector rates;
  for (const auto& [key, row] : table.rows(u)) {
    if (!row.next || !row.next_active) continue;
    auto piece = std::find_if(pieces.begin(), pieces.end(), [&](const DataPiece& p) { return p.id == key.piece; });
    if (piece == pieces.end()) continue;
    rates[*row.next] += piece->rate;
  }
  return rates;
}

double node_load(const NetworkState& net, const PathTable& table, std::span<const DataPiece> pieces,
                 NodeId u) {
  double load = 0.0;
  for (const auto& [v, a] : aggregate_rates(table, pieces, u)) load += net.link(u, v).eps * a;
  return load;
}

double max_epoch_duration(const NetworkState& net, const PathTable& table,
                          std::span<const DataPiece> pieces, const LifetimeParams& params) {
  double j_max = kInfiniteLifetime;
  for (const auto& n : net.nodes()) {
    RateVector rates = aggregate_rates(table, pieces, n.id);
    if (rates.empty()) continue;
    std::map<NodeId, double> eps;
    for (const auto& [v, a] : rates) eps[v] = net.link(n.id, v).eps;
    j_max = std::min(j_max, node_lifetime(n.energy, rates, eps, params));
  }
  return j_max;
}

bool trigger_check(double eps_now, double eps_prev, double gamma) {
  if (!(eps_now > 0.0)) throw std::invalid_argument("trigger_check needs a positive current eps");
  return (eps_now - eps_prev) / eps_now > gamma;
}

}  // namespace iiotfwd
