#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "netmodel.hpp"

namespace iiotfwd {

enum class Strategy { Pdd, PddCr, DistrDataFwd };

const char* strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);

struct PieceSpec {
  NodeId source;
  NodeId consumer;
  int rate = 1;
};

struct ForcedDeath {
  NodeId node;
  std::uint64_t cycle = 0;
};

struct ScenarioConfig {
  std::string name = "scenario";

  // [topology]
  int rows = 3;
  int cols = 6;
  double spacing_m = 2.5;
  double range_m = 3.0;
  std::vector<NodeId> proxies{NodeId{1}, NodeId{4}, NodeId{13}, NodeId{16}};
  double latency_min_ms = 8.0;
  double latency_max_ms = 12.0;

  // [data]
  double consumer_fraction = 0.25;
  int rate_min = 1;
  int rate_max = 8;
  int size_bytes = 9;
  double request_probability = 0.5;
  std::vector<PieceSpec> pieces;  // explicit set; sampled when empty

  // [timing]
  double tau_s = 1.0;
  std::uint64_t horizon = 20000;
  std::uint64_t reference_horizon = 7'200'000;  // 2000 h of 1 s cycles
  double l_max_ms = 100.0;
  double gamma = 0.5;
  int ttl = 2;

  // [interference]
  double event_probability = 0.01;  // per cycle
  double multiplier = 2.5;
  int affected_edges = 1;
  int duration_cycles = 15;

  // [energy]
  double eps_uv_j = 50e-6;
  double eps_cc_ratio = 100.0;
  std::optional<double> e_cfg_j;  // defaults to eps_cc
  double node_energy_min_wh = 0.0;
  double node_energy_max_wh = 1.0;
  double proxy_energy_wh = 3.0;
  double battery_mah = 830.0;
  double battery_v = 3.7;
  bool battery_cap = false;
  std::optional<double> energy_scale;  // defaults to horizon / reference_horizon

  // [failures]
  std::vector<ForcedDeath> forced_deaths;

  // [run]
  std::vector<Strategy> strategies{Strategy::Pdd, Strategy::PddCr, Strategy::DistrDataFwd};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  bool trace = false;
  bool full_horizon = false;
  std::string sweep_key;
  std::vector<std::string> sweep_values;

  std::uint64_t cycles() const { return full_horizon ? reference_horizon : horizon; }
  double scale() const;
  double wh_to_joules(double wh) const { return wh * 3600.0 * scale(); }
  double eps_cc() const { return eps_uv_j * eps_cc_ratio; }
  double e_cfg() const { return e_cfg_j.value_or(eps_cc()); }
  std::size_t node_count() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  LatencyEnergyConfig link_config() const;
};

class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(int line, std::string field, const std::string& what);
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

/// Sections [topology] [data] [timing] [interference] [energy] [failures] [run]
/// of `key = value` lines; `#` starts a comment. Unknown keys are errors.
ScenarioConfig parse_scenario(std::string_view text);
ScenarioConfig load_scenario(const std::string& path);

/// Sets one `section.key` the way a scenario line would.
void set_option(ScenarioConfig& cfg, std::string_view dotted_key, std::string_view value);

/// All `section.key` names understood by the parser.
std::vector<std::string> option_names();

std::vector<std::uint64_t> parse_seed_list(std::string_view text);

struct Finding {
  std::string field;
  std::string message;
};

/// Range checks, connectivity and plan-time L_max feasibility. Empty when valid.
std::vector<Finding> validate_scenario(const ScenarioConfig& cfg);

/// A concrete network and piece set for one seed.
struct ScenarioInstance {
  NetworkState net;
  std::vector<DataPiece> pieces;
};

ScenarioInstance instantiate(const ScenarioConfig& cfg, std::uint64_t seed);

}  // namespace iiotfwd
