#include "metrics.hpp"

#include <cmath>
#include <iomanip>
#include <limits>

namespace iiotfwd {

const char* loss_cause_name(LossCause c) {
  switch (c) {
    case LossCause::LinkDown: return "link-down";
    case LossCause::NodeDead: return "node-dead";
    case LossCause::PathGap: return "path-gap";
    case LossCause::Loop: return "loop";
    case LossCause::Energy: return "energy";
    case LossCause::NoPlan: return "no-plan";
    case LossCause::EndpointDead: return "endpoint-dead";
  }
  return "?";
}

void write_series_csv(std::ostream& os, const Metrics& m) {
  os << "cycle,energy_data_J,energy_cfg_J,generated,delivered,lost,max_latency_ms,reconfigs,alive_nodes\n";
  os << std::setprecision(10);
  for (const auto& r : m.series) {
    os << r.cycle << ',' << r.energy_data_j << ',' << r.energy_cfg_j << ',' << r.generated << ',' << r.delivered
       << ',' << r.lost << ',' << r.max_latency_ms << ',' << r.reconfigs << ',' << r.alive_nodes << '\n';
  }
}

nlohmann::json summary_json(const Metrics& m) {
  nlohmann::json doc;
  const auto& last = m.last();
  doc["scenario"] = m.scenario;
  doc["strategy"] = strategy_name(m.strategy);
  doc["seed"] = m.seed;
  doc["cycles"] = last.cycle;
  doc["energy"] = {{"data_J", last.energy_data_j},
                   {"cfg_J", last.energy_cfg_j},
                   {"total_J", last.energy_data_j + last.energy_cfg_j}};
  nlohmann::json causes = nlohmann::json::object();
  for (std::size_t k = 0; k < kLossCauses; ++k) causes[loss_cause_name(static_cast<LossCause>(k))] = m.loss_by_cause[k];
  doc["pieces"] = {{"generated", last.generated},
                   {"delivered", last.delivered},
                   {"lost", last.lost},
                   {"in_transit", last.in_transit},
                   {"lost_by_cause", causes},
                   {"unplanned_at_start", m.unplanned_at_start}};
  doc["access"] = {{"requests", m.requests},
                   {"misses", m.misses},
                   {"max_latency_ms", m.max_latency_ms},
                   {"latency_violations", m.latency_violations}};
  auto deaths = nlohmann::json::array();
  for (const auto& [node, cycle] : m.deaths) deaths.push_back({{"node", node.value}, {"cycle", cycle}});
  doc["deaths"] = deaths;
  doc["epochs"] = m.epoch_boundaries;
  doc["reconfigs"] = last.reconfigs;
  doc["recomputations"] = m.recomputations;
  doc["initial_j_max_cycles"] = std::isinf(m.initial_j_max) ? nlohmann::json(nullptr) : nlohmann::json(m.initial_j_max);
  doc["interference_events"] = m.interference_events;
  doc["conservation_failures"] = m.conservation_failures;
  const auto& p = m.protocol;
  doc["protocol"] = {{"messages", p.messages},       {"alerts", p.alerts},
                     {"joins", p.joins},             {"modify_path", p.modifies},
                     {"route_requests", p.route_requests}, {"route_replies", p.route_replies},
                     {"broken_legs", p.broken_legs}, {"failed_discoveries", p.failed_discoveries},
                     {"dropped", p.dropped}};
  return doc;
}

void write_trace(std::ostream& os, const Metrics& m) {
  for (const auto& line : m.trace) os << line << '\n';
}

RunTotals totals_of(const Metrics& m) {
  const auto& last = m.last();
  return RunTotals{m.strategy,          m.seed,          last.energy_data_j, last.energy_cfg_j,
                   last.generated,      last.delivered,  last.lost,          m.max_latency_ms,
                   m.latency_violations, last.reconfigs, m.deaths.size(),    m.conservation_failures};
}

}  // namespace iiotfwd
