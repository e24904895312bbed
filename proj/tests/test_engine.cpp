#include <doctest.h>

#include <sstream>

#include "fixtures.hpp"

using namespace iiotfwd;
using fixtures::N;

namespace {

/// Small quiet network: no interference, batteries far beyond the horizon.
ScenarioConfig quiet() {
  ScenarioConfig cfg;
  cfg.horizon = 2000;
  cfg.event_probability = 0.0;
  cfg.energy_scale = 1.0;
  cfg.node_energy_min_wh = 0.5;
  return cfg;
}

std::string csv_of(const Metrics& m) {
  std::ostringstream os;
  write_series_csv(os, m);
  return os.str();
}

const std::vector<Strategy> kAll{Strategy::Pdd, Strategy::PddCr, Strategy::DistrDataFwd};

}  // namespace

TEST_CASE("a quiet network loses nothing and never reconfigures") {
  auto cfg = quiet();
  for (Strategy s : kAll) {
    CAPTURE(strategy_name(s));
    auto m = run_simulation(cfg, s, 3);
    CHECK(m.last().lost == 0);
    CHECK(m.last().reconfigs == 0);
    CHECK(m.last().generated == m.last().delivered);
    CHECK(m.last().generated > 0);
    CHECK(m.deaths.empty());
    CHECK(m.series.size() == cfg.horizon + 1);
  }
}

TEST_CASE("strategies coincide when nothing happens") {
  auto cfg = quiet();
  auto pdd = run_simulation(cfg, Strategy::Pdd, 5);
  auto cr = run_simulation(cfg, Strategy::PddCr, 5);
  auto ddf = run_simulation(cfg, Strategy::DistrDataFwd, 5);
  CHECK(csv_of(pdd) == csv_of(cr));
  CHECK(csv_of(pdd) == csv_of(ddf));
}

TEST_CASE("a relay killed mid-run") {
  auto cfg = quiet();
  cfg.pieces = {PieceSpec{N(0), N(17), 2}};
  Simulation probe(cfg, Strategy::Pdd, 1);
  probe.configure();
  std::optional<NodeId> found;
  for (Leg l : {Leg::Source, Leg::Consumer}) {
    auto hops = trace_leg(probe.table(), probe.pieces()[0], l);
    for (std::size_t k = 1; k + 1 < hops.size() && !found; ++k) {
      if (!probe.net().is_proxy(hops[k])) found = hops[k];
    }
  }
  REQUIRE(found);
  const NodeId relay = *found;
  const std::uint64_t d = 500;
  cfg.forced_deaths = {ForcedDeath{relay, d}};

  auto pdd = run_simulation(cfg, Strategy::Pdd, 1);
  auto cr = run_simulation(cfg, Strategy::PddCr, 1);
  auto ddf = run_simulation(cfg, Strategy::DistrDataFwd, 1);

  // Without repair every piece from cycle d on is lost at or behind the relay.
  CHECK(pdd.last().lost == 2 * (cfg.horizon - d + 1));
  CHECK(pdd.loss_by_cause[static_cast<std::size_t>(LossCause::NodeDead)] == 2 * (cfg.horizon - d));
  REQUIRE(pdd.deaths.size() == 1);
  CHECK(pdd.deaths[0] == std::make_pair(relay, d));

  // Central recomputation in the same cycle loses only that cycle's pieces.
  CHECK(cr.last().lost == 2);
  CHECK(cr.recomputations == 1);

  // Local repair needs a few cycles of messages.
  CHECK(ddf.last().lost > cr.last().lost);
  CHECK(ddf.last().lost < pdd.last().lost);
  CHECK(ddf.last().reconfigs >= 1);
}

TEST_CASE("local repairs cost less configuration energy than central ones") {
  ScenarioConfig cfg;
  cfg.horizon = 5000;
  cfg.event_probability = 0.05;
  cfg.energy_scale = 1.0;
  cfg.node_energy_min_wh = 0.5;
  auto cr = run_simulation(cfg, Strategy::PddCr, 2);
  auto ddf = run_simulation(cfg, Strategy::DistrDataFwd, 2);
  REQUIRE(cr.last().reconfigs > 0);
  REQUIRE(ddf.last().reconfigs > 0);
  const double start = cr.series.front().energy_cfg_j;
  CHECK(start == doctest::Approx(18 * cfg.eps_cc()));
  CHECK(ddf.series.front().energy_cfg_j == start);
  const double per_cr = (cr.last().energy_cfg_j - start) / static_cast<double>(cr.last().reconfigs);
  const double per_ddf = (ddf.last().energy_cfg_j - start) / static_cast<double>(ddf.last().reconfigs);
  CHECK(per_cr == doctest::Approx(18 * cfg.eps_cc()));
  CHECK(per_ddf < per_cr);
}

TEST_CASE("interference trips reconfiguration only above the threshold") {
  auto cfg = quiet();
  cfg.event_probability = 0.05;
  SUBCASE("multiplier 2.5") {
    cfg.multiplier = 2.5;
    CHECK(run_simulation(cfg, Strategy::PddCr, 4).recomputations > 0);
    CHECK(run_simulation(cfg, Strategy::DistrDataFwd, 4).last().reconfigs > 0);
  }
  SUBCASE("multiplier 1.0") {
    cfg.multiplier = 1.0;
    auto cr = run_simulation(cfg, Strategy::PddCr, 4);
    CHECK(cr.interference_events > 0);
    CHECK(cr.recomputations == 0);
    CHECK(run_simulation(cfg, Strategy::DistrDataFwd, 4).last().reconfigs == 0);
  }
}

TEST_CASE("interference raises and restores link costs") {
  auto net = fixtures::graph(2, {{0, 1}});
  InterferenceModel model(InterferenceParams{1.0, 2.5, 1, 3}, 9);
  auto hit = model.step(net, 1);
  REQUIRE(hit.size() == 1);
  auto [u, v] = hit[0];
  CHECK(net.link(u, v).eps == doctest::Approx(125e-6));
  InterferenceModel off(InterferenceParams{0.0, 2.5, 1, 3}, 9);
  auto other = fixtures::graph(2, {{0, 1}});
  CHECK(off.step(other, 1).empty());
}

TEST_CASE("access latency is measured over the consumer leg") {
  // proxy 0 -> 1 -> consumer 2, 10 ms hops: 40 ms round trip.
  auto net = fixtures::graph(3, {{0, 1}, {1, 2}}, 100.0, {0});
  ScenarioConfig cfg = quiet();
  cfg.rows = 1;
  cfg.cols = 3;
  cfg.proxies = {N(0)};
  cfg.request_probability = 1.0;
  cfg.horizon = 50;
  ScenarioInstance inst{std::move(net), {DataPiece{0, N(1), N(2), 1, std::nullopt}}};

  SUBCASE("within the bound") {
    Simulation sim(inst, cfg, Strategy::Pdd, 1);
    auto m = sim.run();
    CHECK(m.max_latency_ms == 40.0);
    CHECK(m.requests == 50);
    CHECK(m.latency_violations == 0);
  }
  SUBCASE("slower links after planning") {
    Simulation sim(inst, cfg, Strategy::Pdd, 1);
    sim.configure();
    for (auto [u, v] : {std::pair{0u, 1u}, {1u, 0u}, {1u, 2u}, {2u, 1u}}) sim.net().link(N(u), N(v)).latency_ms = 30.0;
    auto m = sim.run();
    CHECK(m.max_latency_ms == 120.0);
    CHECK(m.latency_violations == 50);
  }
}

TEST_CASE("pieces and energy are conserved") {
  ScenarioConfig cfg;
  cfg.horizon = 5000;
  cfg.event_probability = 0.05;
  for (Strategy s : kAll) {
    CAPTURE(strategy_name(s));
    Simulation sim(cfg, s, 6, RunOptions{false, true});
    double initial = 0.0;
    for (const auto& n : sim.net().nodes()) initial += n.energy;
    auto m = sim.run();
    CHECK(m.conservation_failures == 0);
    for (const auto& r : m.series) {
      if (r.generated != r.delivered + r.lost) {
        FAIL("conservation broken at cycle " << r.cycle);
      }
    }
    std::uint64_t by_cause = 0;
    for (auto c : m.loss_by_cause) by_cause += c;
    CHECK(by_cause == m.last().lost);
    double left = 0.0;
    for (const auto& n : sim.net().nodes()) left += n.energy;
    CHECK(initial - left == doctest::Approx(m.energy_total_j()).epsilon(1e-9));
    double logged = 0.0;
    for (const auto& t : sim.ledger().log()) logged += t.joules;
    CHECK(logged == doctest::Approx(m.energy_total_j()).epsilon(1e-9));
  }
}

TEST_CASE("runs are reproducible") {
  ScenarioConfig cfg;
  cfg.horizon = 3000;
  for (Strategy s : kAll) {
    auto a = run_simulation(cfg, s, 8, RunOptions{true, false});
    auto b = run_simulation(cfg, s, 8, RunOptions{true, false});
    CHECK(csv_of(a) == csv_of(b));
    CHECK(summary_json(a).dump() == summary_json(b).dump());
    CHECK(a.trace == b.trace);
  }
  auto a = run_simulation(cfg, Strategy::DistrDataFwd, 8);
  auto c = run_simulation(cfg, Strategy::DistrDataFwd, 9);
  CHECK(csv_of(a) != csv_of(c));
}

TEST_CASE("the first death comes no later than the first epoch bound") {
  ScenarioConfig cfg;
  cfg.event_probability = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto m = run_simulation(cfg, Strategy::Pdd, seed);
    CAPTURE(seed);
    if (m.deaths.empty()) {
      CHECK(m.initial_j_max + 1.0 > static_cast<double>(cfg.horizon));
    } else {
      CHECK(static_cast<double>(m.deaths.front().second) <= m.initial_j_max + 1.0);
    }
  }
}

TEST_CASE("the series CSV has the documented columns") {
  auto cfg = quiet();
  cfg.horizon = 5;
  auto m = run_simulation(cfg, Strategy::Pdd, 1);
  auto text = csv_of(m);
  std::istringstream in(text);
  std::string header;
  std::getline(in, header);
  CHECK(header == "cycle,energy_data_J,energy_cfg_J,generated,delivered,lost,max_latency_ms,reconfigs,alive_nodes");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) {
    CHECK(std::count(line.begin(), line.end(), ',') == 8);
    ++rows;
  }
  CHECK(rows == 6);
  auto doc = summary_json(m);
  CHECK(doc.contains("deaths"));
  CHECK(doc.contains("epochs"));
  CHECK(doc["pieces"]["generated"] == m.last().generated);
}
