#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "netmodel.hpp"
#include "protocol.hpp"
#include "scenario.hpp"

namespace iiotfwd {

enum class LossCause : std::uint8_t { LinkDown, NodeDead, PathGap, Loop, Energy, NoPlan, EndpointDead };
inline constexpr std::size_t kLossCauses = 7;
const char* loss_cause_name(LossCause c);

/// One CSV row. Everything is cumulative except max_latency_ms, which is the
/// largest access latency observed in that cycle (0 when nothing was served).
struct CycleRecord {
  std::uint64_t cycle = 0;
  double energy_data_j = 0.0;
  double energy_cfg_j = 0.0;
  std::uint64_t generated = 0;
  std::uint64_t delivered = 0;
  std::uint64_t lost = 0;
  std::uint64_t in_transit = 0;
  double max_latency_ms = 0.0;
  std::uint64_t reconfigs = 0;
  std::uint64_t alive_nodes = 0;
};

struct Metrics {
  Strategy strategy = Strategy::Pdd;
  std::uint64_t seed = 0;
  std::string scenario;
  std::vector<CycleRecord> series;

  std::array<std::uint64_t, kLossCauses> loss_by_cause{};
  std::vector<std::pair<NodeId, std::uint64_t>> deaths;
  std::vector<std::uint64_t> epoch_boundaries;  // cycles that reconfigured
  std::uint64_t requests = 0;
  std::uint64_t misses = 0;
  std::uint64_t latency_violations = 0;  // served, but above L_max
  double max_latency_ms = 0.0;
  double initial_j_max = 0.0;
  std::uint64_t recomputations = 0;
  std::uint64_t conservation_failures = 0;
  std::size_t unplanned_at_start = 0;
  std::uint64_t interference_events = 0;
  ProtocolStats protocol;
  std::vector<std::string> trace;

  const CycleRecord& last() const { return series.back(); }
  double energy_total_j() const { return last().energy_data_j + last().energy_cfg_j; }
};

void write_series_csv(std::ostream& os, const Metrics& m);
nlohmann::json summary_json(const Metrics& m);
void write_trace(std::ostream& os, const Metrics& m);

/// Reduced per-run record kept after the full series is written.
struct RunTotals {
  Strategy strategy = Strategy::Pdd;
  std::uint64_t seed = 0;
  double energy_data_j = 0.0;
  double energy_cfg_j = 0.0;
  std::uint64_t generated = 0;
  std::uint64_t delivered = 0;
  std::uint64_t lost = 0;
  double max_latency_ms = 0.0;
  std::uint64_t latency_violations = 0;
  std::uint64_t reconfigs = 0;
  std::uint64_t deaths = 0;
  std::uint64_t conservation_failures = 0;

  double energy_total_j() const { return energy_data_j + energy_cfg_j; }
};

RunTotals totals_of(const Metrics& m);

}  // namespace iiotfwd
