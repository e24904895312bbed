#include "scenario.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "planner.hpp"

namespace iiotfwd {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Pdd: return "PDD";
    case Strategy::PddCr: return "PDD-CR";
    case Strategy::DistrDataFwd: return "DistrDataFwd";
  }
  return "?";
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  while (true) {
    auto pos = s.find(sep);
    auto item = trim(s.substr(0, pos));
    if (!item.empty()) out.push_back(item);
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return out;
}

// Value errors carry no line; the caller adds it.
struct BadValue : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double to_double(std::string_view v) {
  std::string s(trim(v));
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(s, &used);
  } catch (const std::exception&) {
    throw BadValue("expected a number, got '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(d)) throw BadValue("expected a number, got '" + s + "'");
  return d;
}

template <class Int>
Int to_int(std::string_view v) {
  v = trim(v);
  Int out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw BadValue("expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

bool to_bool(std::string_view v) {
  auto s = lower(trim(v));
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  throw BadValue("expected true or false, got '" + s + "'");
}

std::optional<double> to_auto_double(std::string_view v) {
  if (lower(trim(v)) == "auto") return std::nullopt;
  return to_double(v);
}

NodeId to_node(std::string_view v) { return NodeId{to_int<std::uint32_t>(v)}; }

std::vector<std::uint64_t> seeds_from(std::string_view text);

using Setter = std::function<void(ScenarioConfig&, std::string_view)>;

struct Option {
  std::string name;  // section.key
  Setter set;
};

const std::vector<Option>& options() {
  static const std::vector<Option> table = [] {
    std::vector<Option> t;
    auto num = [&](std::string name, double ScenarioConfig::*field) {
      t.push_back({std::move(name), [field](ScenarioConfig& c, std::string_view v) { c.*field = to_double(v); }});
    };
    auto integer = [&](std::string name, int ScenarioConfig::*field) {
      t.push_back({std::move(name), [field](ScenarioConfig& c, std::string_view v) { c.*field = to_int<int>(v); }});
    };
    auto count = [&](std::string name, std::uint64_t ScenarioConfig::*field) {
      t.push_back({std::move(name),
                   [field](ScenarioConfig& c, std::string_view v) { c.*field = to_int<std::uint64_t>(v); }});
    };
    auto flag = [&](std::string name, bool ScenarioConfig::*field) {
      t.push_back({std::move(name), [field](ScenarioConfig& c, std::string_view v) { c.*field = to_bool(v); }});
    };

    t.push_back({"scenario.name", [](ScenarioConfig& c, std::string_view v) { c.name = std::string(trim(v)); }});

    integer("topology.rows", &ScenarioConfig::rows);
    integer("topology.cols", &ScenarioConfig::cols);
    num("topology.spacing_m", &ScenarioConfig::spacing_m);
    num("topology.range_m", &ScenarioConfig::range_m);
    t.push_back({"topology.proxies", [](ScenarioConfig& c, std::string_view v) {
                   c.proxies.clear();
                   for (auto item : split(v, ',')) c.proxies.push_back(to_node(item));
                 }});
    num("topology.latency_min_ms", &ScenarioConfig::latency_min_ms);
    num("topology.latency_max_ms", &ScenarioConfig::latency_max_ms);

    num("data.consumer_fraction", &ScenarioConfig::consumer_fraction);
    integer("data.rate_min", &ScenarioConfig::rate_min);
    integer("data.rate_max", &ScenarioConfig::rate_max);
    integer("data.size_bytes", &ScenarioConfig::size_bytes);
    num("data.request_probability", &ScenarioConfig::request_probability);
    t.push_back({"data.pieces", [](ScenarioConfig& c, std::string_view v) {
                   // source>consumer:rate, comma separated
                   c.pieces.clear();
                   for (auto item : split(v, ',')) {
                     auto gt = item.find('>');
                     auto colon = item.find(':');
                     if (gt == std::string_view::npos || colon == std::string_view::npos || colon < gt) {
                       throw BadValue("piece '" + std::string(item) + "' is not source>consumer:rate");
                     }
                     c.pieces.push_back(PieceSpec{to_node(item.substr(0, gt)),
                                                  to_node(item.substr(gt + 1, colon - gt - 1)),
                                                  to_int<int>(item.substr(colon + 1))});
                   }
                 }});

    num("timing.tau_s", &ScenarioConfig::tau_s);
    count("timing.horizon", &ScenarioConfig::horizon);
    count("timing.reference_horizon", &ScenarioConfig::reference_horizon);
    num("timing.l_max_ms", &ScenarioConfig::l_max_ms);
    num("timing.gamma", &ScenarioConfig::gamma);
    integer("timing.ttl", &ScenarioConfig::ttl);

    num("interference.event_probability", &ScenarioConfig::event_probability);
    num("interference.multiplier", &ScenarioConfig::multiplier);
    integer("interference.affected_edges", &ScenarioConfig::affected_edges);
    integer("interference.duration_cycles", &ScenarioConfig::duration_cycles);

    num("energy.eps_uv_j", &ScenarioConfig::eps_uv_j);
    num("energy.eps_cc_ratio", &ScenarioConfig::eps_cc_ratio);
    t.push_back({"energy.e_cfg_j", [](ScenarioConfig& c, std::string_view v) { c.e_cfg_j = to_auto_double(v); }});
    num("energy.node_energy_min_wh", &ScenarioConfig::node_energy_min_wh);
    num("energy.node_energy_max_wh", &ScenarioConfig::node_energy_max_wh);
    num("energy.proxy_energy_wh", &ScenarioConfig::proxy_energy_wh);
    num("energy.battery_mah", &ScenarioConfig::battery_mah);
    num("energy.battery_v", &ScenarioConfig::battery_v);
    flag("energy.battery_cap", &ScenarioConfig::battery_cap);
    t.push_back({"energy.energy_scale",
                 [](ScenarioConfig& c, std::string_view v) { c.energy_scale = to_auto_double(v); }});

    t.push_back({"failures.forced_deaths", [](ScenarioConfig& c, std::string_view v) {
                   // node@cycle, comma separated
                   c.forced_deaths.clear();
                   for (auto item : split(v, ',')) {
                     auto at = item.find('@');
                     if (at == std::string_view::npos) {
                       throw BadValue("forced death '" + std::string(item) + "' is not node@cycle");
                     }
                     c.forced_deaths.push_back(
                         ForcedDeath{to_node(item.substr(0, at)), to_int<std::uint64_t>(item.substr(at + 1))});
                   }
                 }});

    t.push_back({"run.strategies", [](ScenarioConfig& c, std::string_view v) {
                   c.strategies.clear();
                   for (auto item : split(v, ',')) {
                     auto s = parse_strategy(item);
                     if (!s) throw BadValue("unknown strategy '" + std::string(item) + "'");
                     c.strategies.push_back(*s);
                   }
                 }});
    t.push_back({"run.seeds", [](ScenarioConfig& c, std::string_view v) { c.seeds = seeds_from(v); }});
    flag("run.trace", &ScenarioConfig::trace);
    flag("run.full_horizon", &ScenarioConfig::full_horizon);
    t.push_back({"run.sweep_key", [](ScenarioConfig& c, std::string_view v) { c.sweep_key = std::string(trim(v)); }});
    t.push_back({"run.sweep_values", [](ScenarioConfig& c, std::string_view v) {
                   c.sweep_values.clear();
                   for (auto item : split(v, ',')) c.sweep_values.emplace_back(item);
                 }});
    return t;
  }();
  return table;
}

const Option* find_option(std::string_view name) {
  auto key = lower(name);
  for (const auto& o : options()) {
    if (o.name == key) return &o;
  }
  return nullptr;
}

}  // namespace

std::optional<Strategy> parse_strategy(std::string_view name) {
  auto s = lower(trim(name));
  if (s == "pdd") return Strategy::Pdd;
  if (s == "pdd-cr" || s == "pddcr" || s == "pdd_cr") return Strategy::PddCr;
  if (s == "distrdatafwd" || s == "ddf") return Strategy::DistrDataFwd;
  return std::nullopt;
}

double ScenarioConfig::scale() const {
  if (energy_scale) return *energy_scale;
  if (full_horizon || reference_horizon == 0) return 1.0;
  return static_cast<double>(horizon) / static_cast<double>(reference_horizon);
}

LatencyEnergyConfig ScenarioConfig::link_config() const {
  LatencyEnergyConfig c;
  c.latency_min_ms = latency_min_ms;
  c.latency_max_ms = latency_max_ms;
  c.eps_uv = eps_uv_j;
  c.eps_cc = eps_cc();
  c.node_energy_min = wh_to_joules(node_energy_min_wh);
  c.node_energy_max = wh_to_joules(node_energy_max_wh);
  c.proxy_energy = wh_to_joules(proxy_energy_wh);
  if (battery_cap) c.energy_cap = wh_to_joules(battery_mah * battery_v / 1000.0);
  return c;
}

ScenarioError::ScenarioError(int line, std::string field, const std::string& what)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + field + ": " + what
                                  : field + ": " + what),
      line_(line),
      field_(std::move(field)) {}

namespace {

std::vector<std::uint64_t> seeds_from(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  for (auto item : split(text, ',')) {
    auto dash = item.find('-');
    if (dash != std::string_view::npos && dash > 0) {
      auto lo = to_int<std::uint64_t>(item.substr(0, dash));
      auto hi = to_int<std::uint64_t>(item.substr(dash + 1));
      if (hi < lo) throw BadValue("seed range '" + std::string(item) + "' is reversed");
      if (hi - lo > 1'000'000) throw BadValue("seed range '" + std::string(item) + "' is too large");
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    } else {
      seeds.push_back(to_int<std::uint64_t>(item));
    }
  }
  if (seeds.empty()) throw BadValue("empty seed list");
  return seeds;
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  try {
    return seeds_from(text);
  } catch (const BadValue& e) {
    throw ScenarioError(0, "run.seeds", e.what());
  }
}

void set_option(ScenarioConfig& cfg, std::string_view dotted_key, std::string_view value) {
  const Option* o = find_option(trim(dotted_key));
  if (!o) throw ScenarioError(0, std::string(trim(dotted_key)), "unknown key");
  try {
    o->set(cfg, value);
  } catch (const BadValue& e) {
    throw ScenarioError(0, o->name, e.what());
  }
}

std::vector<std::string> option_names() {
  std::vector<std::string> out;
  for (const auto& o : options()) out.push_back(o.name);
  return out;
}

ScenarioConfig parse_scenario(std::string_view text) {
  ScenarioConfig cfg;
  std::string section;
  int line_no = 0;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  for (std::string raw_line; std::getline(in, raw_line);) {
    ++line_no;
    std::string_view raw = raw_line;
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    auto line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ScenarioError(line_no, std::string(line), "unterminated section header");
      section = lower(trim(line.substr(1, line.size() - 2)));
      static const std::set<std::string> known{"scenario", "topology", "data",     "timing",
                                               "interference", "energy", "failures", "run"};
      if (!known.contains(section)) throw ScenarioError(line_no, section, "unknown section");
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ScenarioError(line_no, std::string(line), "expected key = value");
    auto key = lower(trim(line.substr(0, eq)));
    auto value = trim(line.substr(eq + 1));
    if (section.empty()) throw ScenarioError(line_no, key, "key outside any section");
    std::string dotted = section + "." + key;
    const Option* o = find_option(dotted);
    if (!o) throw ScenarioError(line_no, dotted, "unknown key");
    if (!seen.insert(dotted).second) throw ScenarioError(line_no, dotted, "duplicate key");
    try {
      o->set(cfg, value);
    } catch (const BadValue& e) {
      throw ScenarioError(line_no, dotted, e.what());
    }
  }
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(0, path, "cannot open scenario file");
  std::ostringstream buf;
  buf << in.rdbuf();
  ScenarioConfig cfg = parse_scenario(buf.str());
  return cfg;
}

std::vector<Finding> validate_scenario(const ScenarioConfig& c) {
  std::vector<Finding> f;
  auto need = [&](bool ok, const char* field, const std::string& msg) {
    if (!ok) f.push_back(Finding{field, msg});
  };
  need(c.rows >= 1 && c.cols >= 1 && c.rows * c.cols >= 2, "topology.rows", "grid needs at least two nodes");
  need(c.spacing_m > 0.0, "topology.spacing_m", "must be positive");
  need(c.range_m > 0.0, "topology.range_m", "must be positive");
  need(c.range_m >= c.spacing_m, "topology.range_m",
       "range below grid spacing leaves the topology disconnected");
  need(c.latency_min_ms > 0.0 && c.latency_max_ms >= c.latency_min_ms, "topology.latency_min_ms",
       "latency interval must be positive and ordered");
  need(!c.proxies.empty(), "topology.proxies", "at least one proxy is required");
  std::set<NodeId> proxy_set(c.proxies.begin(), c.proxies.end());
  need(proxy_set.size() == c.proxies.size(), "topology.proxies", "duplicate proxy id");
  for (NodeId p : c.proxies) {
    need(p.index() < c.node_count(), "topology.proxies", "proxy " + std::to_string(p.value) + " outside the grid");
  }
  need(proxy_set.size() < c.node_count(), "topology.proxies", "every node is a proxy");

  need(c.consumer_fraction > 0.0 && c.consumer_fraction <= 1.0, "data.consumer_fraction", "must lie in (0, 1]");
  need(c.rate_min >= 0 && c.rate_max >= c.rate_min, "data.rate_min", "rate range must be non-negative and ordered");
  need(c.size_bytes > 0, "data.size_bytes", "must be positive");
  need(c.request_probability >= 0.0 && c.request_probability <= 1.0, "data.request_probability",
       "must lie in [0, 1]");
  for (const auto& p : c.pieces) {
    need(p.source != p.consumer, "data.pieces", "piece source equals its consumer");
    need(p.source.index() < c.node_count() && p.consumer.index() < c.node_count(), "data.pieces",
         "piece endpoint outside the grid");
    need(p.rate >= 0, "data.pieces", "piece rate must be non-negative");
  }

  need(c.tau_s > 0.0, "timing.tau_s", "must be positive");
  need(c.horizon > 0, "timing.horizon", "must be positive");
  need(c.reference_horizon > 0, "timing.reference_horizon", "must be positive");
  need(c.l_max_ms > 0.0, "timing.l_max_ms", "must be positive");
  need(c.gamma > 0.0 && c.gamma < 1.0, "timing.gamma", "must lie in (0, 1)");
  need(c.ttl >= 1, "timing.ttl", "must be at least 1");

  need(c.event_probability >= 0.0 && c.event_probability <= 1.0, "interference.event_probability",
       "must lie in [0, 1]");
  need(c.multiplier >= 1.0, "interference.multiplier", "must be at least 1");
  need(c.affected_edges >= 1, "interference.affected_edges", "must be at least 1");
  need(c.duration_cycles >= 1, "interference.duration_cycles", "must be at least 1");

  need(c.eps_uv_j > 0.0, "energy.eps_uv_j", "must be positive");
  need(c.eps_cc_ratio > 0.0, "energy.eps_cc_ratio", "must be positive");
  need(!c.e_cfg_j || *c.e_cfg_j >= 0.0, "energy.e_cfg_j", "must be non-negative");
  need(c.node_energy_min_wh >= 0.0 && c.node_energy_max_wh >= c.node_energy_min_wh, "energy.node_energy_min_wh",
       "energy range must be non-negative and ordered");
  need(c.proxy_energy_wh > 0.0, "energy.proxy_energy_wh", "must be positive");
  need(!c.battery_cap || (c.battery_mah > 0.0 && c.battery_v > 0.0), "energy.battery_mah",
       "battery capacity must be positive");
  need(!c.energy_scale || *c.energy_scale > 0.0, "energy.energy_scale", "must be positive");

  for (const auto& d : c.forced_deaths) {
    need(d.node.index() < c.node_count(), "failures.forced_deaths",
         "node " + std::to_string(d.node.value) + " outside the grid");
    need(d.cycle >= 1, "failures.forced_deaths", "forced deaths happen from cycle 1 on");
  }

  need(!c.strategies.empty(), "run.strategies", "at least one strategy is required");
  need(!c.seeds.empty(), "run.seeds", "at least one seed is required");
  if (!c.sweep_key.empty()) {
    need(find_option(c.sweep_key) != nullptr, "run.sweep_key", "unknown key '" + c.sweep_key + "'");
    need(!c.sweep_values.empty(), "run.sweep_values", "sweep needs values");
  }
  if (!f.empty()) return f;

  // Structural checks on one concrete instance per seed.
  for (auto seed : c.seeds) {
    ScenarioInstance inst;
    try {
      inst = instantiate(c, seed);
    } catch (const TopologyError& e) {
      f.push_back(Finding{"topology.range_m", e.what()});
      return f;
    }
    LifetimeParams lp{c.e_cfg(), c.tau_s, c.gamma};
    auto status = collect_status(inst.net);
    Plan plan = plan_pieces(status, inst.net.size(), inst.net.proxies(), inst.pieces, c.l_max_ms, lp);
    for (PieceId p : plan.infeasible) {
      f.push_back(Finding{"timing.l_max_ms", "seed " + std::to_string(seed) + ": piece " + std::to_string(p) +
                                                 " has no route within " + std::to_string(c.l_max_ms) + " ms"});
    }
    if (!f.empty()) break;
  }
  return f;
}

ScenarioInstance instantiate(const ScenarioConfig& cfg, std::uint64_t seed) {
  std::set<NodeId> proxy_set(cfg.proxies.begin(), cfg.proxies.end());
  ScenarioInstance inst{
      build_grid_topology(cfg.rows, cfg.cols, cfg.spacing_m, cfg.range_m, proxy_set, cfg.link_config(), seed), {}};

  if (!cfg.pieces.empty()) {
    PieceId id = 0;
    for (const auto& p : cfg.pieces) {
      inst.pieces.push_back(DataPiece{id++, p.source, p.consumer, p.rate, std::nullopt, cfg.size_bytes});
    }
    return inst;
  }

  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x71u};
  std::mt19937_64 rng(seq);
  std::vector<NodeId> ordinary;
  for (const auto& n : inst.net.nodes()) {
    if (!n.is_proxy) ordinary.push_back(n.id);
  }
  if (ordinary.size() < 2) return inst;
  auto consumers_wanted = static_cast<std::size_t>(std::lround(cfg.consumer_fraction * ordinary.size()));
  consumers_wanted = std::clamp<std::size_t>(consumers_wanted, 1, ordinary.size());

  std::vector<NodeId> pool = ordinary;
  std::vector<NodeId> consumers;
  for (std::size_t k = 0; k < consumers_wanted; ++k) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    auto at = pool.begin() + static_cast<std::ptrdiff_t>(pick(rng));
    consumers.push_back(*at);
    pool.erase(at);
  }
  std::sort(consumers.begin(), consumers.end());

  std::uniform_int_distribution<int> rate(cfg.rate_min, cfg.rate_max);
  PieceId id = 0;
  for (NodeId c : consumers) {
    std::uniform_int_distribution<std::size_t> pick(0, ordinary.size() - 2);
    std::size_t k = pick(rng);
    NodeId src = ordinary[k];
    if (src >= c) src = ordinary[k + 1];  // skip the consumer itself
    inst.pieces.push_back(DataPiece{id++, src, c, rate(rng), std::nullopt, cfg.size_bytes});
  }
  return inst;
}

}  // namespace iiotfwd
