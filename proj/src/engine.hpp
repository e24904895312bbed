#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "lifetime.hpp"
#include "metrics.hpp"
#include "netmodel.hpp"
#include "planner.hpp"
#include "protocol.hpp"
#include "scenario.hpp"

namespace iiotfwd {

struct InterferenceParams {
  double event_probability = 0.0;
  double multiplier = 2.5;
  int affected_edges = 1;
  int duration_cycles = 15;
};

/// Transient eps spikes on randomly chosen directed links.
class InterferenceModel {
 public:
  InterferenceModel(InterferenceParams params, std::uint64_t seed);

  /// Restores links whose spike ended, then maybe starts a new event.
  /// Returns the links hit this cycle. Spikes do not compound: a link that
  /// is already raised only has its end extended.
  std::vector<std::pair<NodeId, NodeId>> step(NetworkState& net, std::uint64_t cycle);
  std::uint64_t events() const { return events_; }

 private:
  InterferenceParams params_;
  std::mt19937_64 rng_;
  std::map<std::pair<NodeId, NodeId>, std::uint64_t> raised_;  // link -> first cycle back to base
  std::uint64_t events_ = 0;
};

/// Round trip over the current consumer leg, or nothing when the leg cannot
/// carry a request right now.
std::optional<double> sample_access_latency(const NetworkState& net, const PathTable& table,
                                            const DataPiece& piece);

struct RunOptions {
  bool trace = false;
  bool audit = false;  // keep the per-transmission energy log
};

class Simulation {
 public:
  Simulation(const ScenarioConfig& cfg, Strategy strategy, std::uint64_t seed, RunOptions opts = {});
  Simulation(ScenarioInstance instance, const ScenarioConfig& cfg, Strategy strategy, std::uint64_t seed,
             RunOptions opts = {});

  /// Cycle 0: status upload, plan computation and distribution.
  void configure();
  /// One data cycle.
  void step();
  bool done() const { return cycle_ >= cfg_.cycles(); }
  /// configure() if needed, then step() to the horizon.
  Metrics run();

  std::uint64_t cycle() const { return cycle_; }
  const NetworkState& net() const { return net_; }
  NetworkState& net() { return net_; }
  const PathTable& table() const { return table_; }
  const std::vector<DataPiece>& pieces() const { return pieces_; }
  const EnergyLedger& ledger() const { return ledger_; }
  const Metrics& metrics() const { return metrics_; }
  const ProtocolRuntime* runtime() const { return runtime_.get(); }

 private:
  void forward_all();
  std::uint64_t forward_leg(const DataPiece& piece, Leg leg, std::uint64_t count);
  void lose(std::uint64_t count, LossCause cause);
  void serve_requests();
  bool central_trigger() const;
  void record(double max_latency);

  ScenarioConfig cfg_;
  Strategy strategy_;
  std::uint64_t seed_;
  RunOptions opts_;
  LifetimeParams lifetime_;
  NetworkState net_;
  std::vector<DataPiece> pieces_;
  PathTable table_;
  EnergyLedger ledger_;
  std::unique_ptr<ProtocolRuntime> runtime_;
  InterferenceModel interference_;
  std::mt19937_64 requests_rng_;
  std::map<std::uint64_t, std::vector<NodeId>> forced_;
  Metrics metrics_;
  std::uint64_t cycle_ = 0;
  bool configured_ = false;

  std::uint64_t generated_ = 0;
  std::uint64_t delivered_ = 0;
  std::uint64_t lost_ = 0;
  std::uint64_t reconfigs_ = 0;
  double cycle_max_latency_ = 0.0;
};

Metrics run_simulation(const ScenarioConfig& cfg, Strategy strategy, std::uint64_t seed, RunOptions opts = {});

}  // namespace iiotfwd
