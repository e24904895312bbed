#pragma once

#include <limits>
#include <map>
#include <span>

#include "netmodel.hpp"

namespace iiotfwd {

/// Lifetime of a node that transmits nothing.
inline constexpr double kInfiniteLifetime = std::numeric_limits<double>::infinity();

/// a_uv per neighbor, pieces per cycle.
using RateVector = std::map<NodeId, double>;

struct LifetimeParams {
  double e_cfg = 5e-3;  // J spent by a node in one configuration phase
  double tau_s = 1.0;   // cycle length
  double gamma = 0.5;   // trigger threshold
};

/// Maximum lifetime of a node in cycles for a fixed per-link rate assignment.
/// Energy above e_cfg is divided by the per-cycle spend; at or below e_cfg the
/// node lasts one cycle (the configuration phase); an empty node lasts zero.
double node_lifetime(double energy, const RateVector& rates, const std::map<NodeId, double>& eps_per_link,
                     const LifetimeParams& params);

/// Same, with the per-cycle spend sum_v eps_uv * a_uv already folded.
double node_lifetime_from_load(double energy, double joules_per_cycle, const LifetimeParams& params);

/// Aggregate rate per outgoing link of `u` under the current path table.
RateVector aggregate_rates(const PathTable& table, std::span<const DataPiece> pieces, NodeId u);

/// Per-cycle spend of `u` under the current path table, sum_v eps_uv * a_uv.
double node_load(const NetworkState& net, const PathTable& table, std::span<const DataPiece> pieces,
                 NodeId u);

/// J_max: shortest lifetime among nodes with at least one active outgoing link.
double max_epoch_duration(const NetworkState& net, const PathTable& table,
                          std::span<const DataPiece> pieces, const LifetimeParams& params);

/// True iff the cost increase relative to the current cost strictly exceeds gamma.
bool trigger_check(double eps_now, double eps_prev, double gamma);

}  // namespace iiotfwd
