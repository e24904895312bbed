// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "runner.hpp"

namespace fs = std::filesystem;
using namespace iiotfwd;
using fixtures::N;

namespace {

// Pinned tolerances and limits.
constexpr double kUlps = 2.0;                 // criterion 1, relative error in units of machine epsilon
constexpr double kLimit1 = 1.0;               // seconds
constexpr double kLimit2 = 5.0;
constexpr double kLimit3 = 30.0;
constexpr double kLimit4 = 120.0;
constexpr double kEnergyBand = 0.15;          // criterion 6, DDF above PDD by at most this fraction
constexpr double kLossBand = 0.10;            // criterion 8, |DDF - CR| relative to CR
constexpr int kJMaxInstances = 200;
constexpr int kPlannerGraphs = 500;
constexpr int kRepairSequences = 1000;
const std::vector<double> kEventRates{0.001, 0.01, 0.05, 0.1};

const LifetimeParams kParams{5e-3, 1.0, 0.5};

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Timed {
  Outcome outcome;
  double secs = 0.0;
};

Timed measure(const std::function<Outcome()>& body, double limit_s = 0.0) {
  auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = Outcome{false, std::string("exception: ") + e.what()};
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (limit_s > 0.0 && secs >= limit_s) {
    o.pass = false;
    o.detail += fmt(", over the %.0f s limit", limit_s);
  }
  return {o, secs};
}

void report(int id, const char* name, const Timed& t) {
  if (!t.outcome.pass) ++failures;
  std::printf("%s %d %s: %s [%.2f s]\n", t.outcome.pass ? "PASS" : "FAIL", id, name, t.outcome.detail.c_str(),
              t.secs);
  std::fflush(stdout);
}

bool close_ulps(double got, double want) {
  if (got == want) return true;
  return std::fabs(got - want) <= kUlps * std::numeric_limits<double>::epsilon() * std::fabs(want);
}

ScenarioConfig load(const std::string& name) { return load_scenario(std::string(IIOTFWD_SCENARIO_DIR) + "/" + name); }

// Every Metrics produced by criteria 6 to 8, for the conservation check.
std::vector<Metrics> all_runs;

const Metrics& find(const std::vector<Metrics>& runs, Strategy s, std::uint64_t seed) {
  for (const auto& m : runs) {
    if (m.strategy == s && m.seed == seed) return m;
  }
  throw std::runtime_error("missing run");
}

double mean_of(const std::vector<Metrics>& runs, Strategy s, const std::function<double(const Metrics&)>& f) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& m : runs) {
    if (m.strategy != s) continue;
    sum += f(m);
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

Outcome lifetime_suite() {
  std::size_t bad = 0;
  std::size_t checked = 0;
  auto expect = [&](double got, double want) {
    ++checked;
    if (!close_ulps(got, want)) ++bad;
  };
  std::map<NodeId, double> eps{{N(1), 0.25}, {N(2), 0.5}};
  const RateVector busy{{N(1), 2.0}, {N(2), 0.0}};
  // Empty, configuration-only and zero-load cases.
  expect(node_lifetime(0.0, busy, eps, kParams), 0.0);
  expect(node_lifetime(-1.0, busy, eps, kParams), 0.0);
  expect(node_lifetime(kParams.e_cfg, busy, eps, kParams), 1.0);
  expect(node_lifetime(kParams.e_cfg / 2, busy, eps, kParams), 1.0);
  expect(node_lifetime(3.0, {}, {}, kParams), kInfiniteLifetime);
  expect(node_lifetime(3.0, {{N(1), 0.0}, {N(2), 0.0}}, eps, kParams), kInfiniteLifetime);
  // Steady case: 3 / (0.25 * 2 + 0.5 * 1) = 3.
  expect(node_lifetime(3.0, {{N(1), 2.0}, {N(2), 1.0}}, eps, kParams), 3.0);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> energy(0.0, 10.0);
  std::uniform_real_distribution<double> cost(20e-6, 80e-6);
  std::uniform_int_distribution<int> rate(0, 8);
  std::size_t monotone_bad = 0;
  for (int k = 0; k < 2000; ++k) {
    std::map<NodeId, double> e;
    RateVector a;
    for (std::uint32_t v = 0; v < 4; ++v) {
      e[N(v)] = cost(rng);
      a[N(v)] = rate(rng);
    }
    double spend = 0.0;
    for (const auto& [v, r] : a) spend += e[v] * r;
    double en = energy(rng);
    expect(node_lifetime(en, a, e, kParams), oracles::lifetime_of(en, spend, kParams.e_cfg));

    double more = en + energy(rng);
    if (node_lifetime(more, a, e, kParams) < node_lifetime(en, a, e, kParams)) ++monotone_bad;
    RateVector heavier = a;
    heavier[N(static_cast<std::uint32_t>(k % 4))] += 1 + rate(rng);
    if (node_lifetime(en, heavier, e, kParams) > node_lifetime(en, a, e, kParams)) ++monotone_bad;
  }
  return {bad == 0 && monotone_bad == 0,
          fmt("%zu/%zu cases exact, %zu monotonicity violations", checked - bad, checked, monotone_bad)};
}

Outcome jmax_oracle() {
  std::mt19937_64 rng(2);
  int equal = 0;
  for (int k = 0; k < kJMaxInstances; ++k) {
    auto inst = oracles::random_epoch_instance(rng, 20);
    if (max_epoch_duration(inst.net, inst.table, inst.pieces, kParams) ==
        oracles::epoch_bound(inst.net, inst.table, inst.pieces, kParams)) {
      ++equal;
    }
  }
  return {equal == kJMaxInstances, fmt("%d/%d instances equal", equal, kJMaxInstances)};
}

Outcome planner_oracle() {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> size(2, 8);
  std::uniform_real_distribution<double> budget(0.0, 70.0);
  std::uniform_real_distribution<double> loads(0.0, 5e-4);
  std::uniform_int_distribution<int> rate(0, 8);
  std::bernoulli_distribution coin(0.5);
  int agree = 0;
  int found = 0;
  int within = 0;
  for (int g = 0; g < kPlannerGraphs; ++g) {
    auto net = fixtures::random_graph(rng, size(rng), 0.35);
    std::vector<double> load(net.size());
    for (auto& l : load) l = coin(rng) ? loads(rng) : 0.0;
    std::uniform_int_distribution<std::uint32_t> node(0, static_cast<std::uint32_t>(net.size() - 1));
    NodeId from = N(node(rng));
    NodeId to = N(node(rng));
    while (to == from) to = N(node(rng));
    PathQuery q{from, to, budget(rng), static_cast<double>(rate(rng)), coin(rng)};
    PlannerView view(collect_status(net), net.size());
    auto got = bottleneck_path(view, q, load, kParams);
    auto want = oracles::best_path(net, from, to, q.budget_ms, q.rate, q.round_trip, load, kParams);
    if (got.has_value() != want.has_value()) continue;
    if (!got) {
      ++agree;
      continue;
    }
    ++found;
    if (got->bottleneck == want->bottleneck) ++agree;
    if (oracles::latency_of(net, got->hops, q.round_trip) <= q.budget_ms) ++within;
  }
  return {agree == kPlannerGraphs && within == found,
          fmt("%d/%d bottlenecks equal, %d/%d paths within budget", agree, kPlannerGraphs, within, found)};
}

// Random grid shape and proxy set; returns nullopt if the draw is not a valid scenario.
std::optional<ScenarioConfig> random_grid(std::mt19937_64& rng) {
  ScenarioConfig cfg;
  cfg.rows = std::uniform_int_distribution<std::size_t>(2, 5)(rng);
  cfg.cols = std::uniform_int_distribution<std::size_t>(3, 7)(rng);
  const auto n = static_cast<std::uint32_t>(cfg.rows * cfg.cols);
  std::uniform_int_distribution<std::uint32_t> node(0, n - 1);
  const int count = std::uniform_int_distribution<int>(1, 4)(rng);
  std::set<std::uint32_t> picked;
  while (static_cast<int>(picked.size()) < count) picked.insert(node(rng));
  cfg.proxies.clear();
  for (auto p : picked) cfg.proxies.push_back(N(p));
  if (!validate_scenario(cfg).empty()) return std::nullopt;
  return cfg;
}

Outcome loop_freedom() {
  std::mt19937_64 rng(4);
  int sequences = 0;
  int events = 0;
  int loops = 0;
  int asym = 0;
  int unsettled = 0;
  for (std::uint64_t seed = 1; sequences < kRepairSequences && seed < 100000; ++seed) {
    auto cfg = random_grid(rng);
    if (!cfg) continue;
    auto inst = instantiate(*cfg, seed);
    LifetimeParams lp{cfg->e_cfg(), cfg->tau_s, cfg->gamma};
    auto plan = plan_pieces(collect_status(inst.net), inst.net.size(), inst.net.proxies(), inst.pieces,
                            cfg->l_max_ms, lp);
    if (plan.entries.empty()) continue;
    ProtocolParams params;
    params.lifetime = lp;
    params.ttl = cfg->ttl;
    fixtures::World w(std::move(inst.net), std::move(inst.pieces), params);
    install_plan(plan, w.pieces, w.table);
    const int length = std::uniform_int_distribution<int>(1, 8)(rng);
    int applied = 0;
    for (int event = 0; event < length; ++event) {
      std::vector<std::pair<NodeId, NodeId>> hops;
      for (const auto& n : w.net.nodes()) {
        if (!n.alive) continue;
        for (const auto& [leg, row] : w.table.rows(n.id)) {
          if (row.next && row.next_active) hops.emplace_back(n.id, *row.next);
        }
      }
      if (hops.empty()) break;
      auto [u, v] = hops[std::uniform_int_distribution<std::size_t>(0, hops.size() - 1)(rng)];
      if (std::bernoulli_distribution(0.5)(rng)) {
        w.rt->fail_link_now(u, v, w.cycle);
      } else {
        w.rt->disconnect_now(v, w.cycle);
      }
      ++applied;
      ++events;
      w.settle(200);
      if (!w.rt->quiescent()) ++unsettled;
      auto r = validate_paths(w.net, w.table, w.pieces);
      loops += static_cast<int>(r.count(ViolationKind::Loop));
      asym += static_cast<int>(r.count(ViolationKind::PointerAsymmetry));
    }
    if (applied > 0) ++sequences;
  }
  return {sequences >= kRepairSequences && loops == 0 && asym == 0 && unsettled == 0,
          fmt("%d sequences, %d events, %d loops, %d asymmetric pointers, %d unsettled", sequences, events, loops,
              asym, unsettled)};
}

Outcome energy_ordering() {
  auto cfg = load("default.ini");
  auto runs = run_grid(cfg, {Strategy::Pdd, Strategy::PddCr, Strategy::DistrDataFwd}, cfg.seeds, false, 0);
  all_runs.insert(all_runs.end(), runs.begin(), runs.end());
  auto total = [](const Metrics& m) { return m.energy_total_j(); };
  double pdd = mean_of(runs, Strategy::Pdd, total);
  double cr = mean_of(runs, Strategy::PddCr, total);
  double ddf = mean_of(runs, Strategy::DistrDataFwd, total);
  bool ok = pdd <= ddf && ddf < cr && ddf <= pdd * (1.0 + kEnergyBand);
  return {ok, fmt("mean total J over %zu seeds: PDD %.4f, DDF %.4f, PDD-CR %.4f; DDF/PDD %.4f", cfg.seeds.size(), pdd,
                  ddf, cr, ddf / pdd)};
}

Outcome reconfiguration_gap() {
  auto base = load("default.ini");
  std::vector<std::vector<double>> gaps(base.seeds.size());
  for (double p : kEventRates) {
    auto cfg = base;
    cfg.event_probability = p;
    auto runs = run_grid(cfg, {Strategy::PddCr, Strategy::DistrDataFwd}, cfg.seeds, false, 0);
    for (std::size_t k = 0; k < cfg.seeds.size(); ++k) {
      const auto& cr = find(runs, Strategy::PddCr, cfg.seeds[k]);
      const auto& ddf = find(runs, Strategy::DistrDataFwd, cfg.seeds[k]);
      gaps[k].push_back(cr.last().energy_cfg_j - ddf.last().energy_cfg_j);
    }
    all_runs.insert(all_runs.end(), runs.begin(), runs.end());
  }
  std::size_t increasing = 0;
  std::string worst;
  for (std::size_t k = 0; k < gaps.size(); ++k) {
    bool ok = true;
    for (std::size_t i = 1; i < gaps[k].size(); ++i) ok = ok && gaps[k][i] > gaps[k][i - 1];
    if (ok) {
      ++increasing;
    } else if (worst.empty()) {
      worst = fmt("; seed %llu gaps %.4f %.4f %.4f %.4f", static_cast<unsigned long long>(base.seeds[k]), gaps[k][0],
                  gaps[k][1], gaps[k][2], gaps[k][3]);
    }
  }
  double mean_lo = 0.0;
  double mean_hi = 0.0;
  for (const auto& g : gaps) {
    mean_lo += g.front() / static_cast<double>(gaps.size());
    mean_hi += g.back() / static_cast<double>(gaps.size());
  }
  return {increasing == gaps.size(),
          fmt("%zu/%zu seeds strictly increasing; mean gap %.4f J at p=0.001 to %.4f J at p=0.1", increasing,
              gaps.size(), mean_lo, mean_hi) +
              worst};
}

Outcome loss_ordering() {
  auto cfg = load("forced_death.ini");
  auto runs = run_grid(cfg, {Strategy::Pdd, Strategy::PddCr, Strategy::DistrDataFwd}, cfg.seeds, false, 0);
  all_runs.insert(all_runs.end(), runs.begin(), runs.end());
  auto lost = [](const Metrics& m) { return static_cast<double>(m.last().lost); };
  double pdd = mean_of(runs, Strategy::Pdd, lost);
  double cr = mean_of(runs, Strategy::PddCr, lost);
  double ddf = mean_of(runs, Strategy::DistrDataFwd, lost);
  bool ok = pdd > cr && std::fabs(ddf - cr) <= kLossBand * cr;
  return {ok, fmt("mean lost pieces: PDD %.1f, PDD-CR %.1f, DDF %.1f; |DDF-CR|/CR %.4f", pdd, cr, ddf,
                  cr > 0 ? std::fabs(ddf - cr) / cr : 0.0)};
}

Outcome latency_behavior() {
  std::uint64_t cr_violations = 0;
  std::uint64_t ddf_violations = 0;
  std::uint64_t cr_requests = 0;
  std::uint64_t ddf_requests = 0;
  for (const auto& m : all_runs) {
    if (m.strategy == Strategy::PddCr) {
      cr_violations += m.latency_violations;
      cr_requests += m.requests;
    } else if (m.strategy == Strategy::DistrDataFwd) {
      ddf_violations += m.latency_violations;
      ddf_requests += m.requests;
    }
  }
  return {cr_violations == 0 && cr_requests > 0 && ddf_requests > 0,
          fmt("PDD-CR %llu violations in %llu requests; DDF %llu violations in %llu requests",
              static_cast<unsigned long long>(cr_violations), static_cast<unsigned long long>(cr_requests),
              static_cast<unsigned long long>(ddf_violations), static_cast<unsigned long long>(ddf_requests))};
}

Outcome conservation() {
  std::size_t cycles = 0;
  std::size_t broken = 0;
  std::uint64_t in_engine = 0;
  for (const auto& m : all_runs) {
    in_engine += m.conservation_failures;
    for (const auto& r : m.series) {
      ++cycles;
      if (r.generated != r.delivered + r.lost) ++broken;
    }
  }
  return {broken == 0 && in_engine == 0 && !all_runs.empty(),
          fmt("%zu runs, %zu cycles, %zu broken", all_runs.size(), cycles, broken)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("iiotfwd_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::size_t compared = 0;
  std::size_t differing = 0;
  for (const char* name : {"default.ini", "forced_death.ini"}) {
    auto cfg = load(name);
    auto a = manifest_from(cfg, root / name / "a");
    auto b = manifest_from(cfg, root / name / "b");
    a.jobs = 0;
    b.jobs = 1;
    run_manifest(a);
    run_manifest(b);
    for (const auto& e : fs::recursive_directory_iterator(a.out_dir)) {
      if (e.path().extension() != ".csv") continue;
      ++compared;
      if (slurp(e.path()) != slurp(b.out_dir / fs::relative(e.path(), a.out_dir))) ++differing;
    }
  }
  fs::remove_all(root);
  return {compared > 0 && differing == 0, fmt("%zu CSVs compared, %zu differ", compared, differing)};
}

}  // namespace

int main() {
  report(1, "node lifetime", measure(lifetime_suite, kLimit1));
  report(2, "epoch bound oracle", measure(jmax_oracle, kLimit2));
  report(3, "planner oracle", measure(planner_oracle, kLimit3));
  report(4, "loop freedom", measure(loop_freedom, kLimit4));

  // Conservation is checked over every scenario run, so those run first.
  auto c6 = measure(energy_ordering);
  auto c7 = measure(reconfiguration_gap);
  auto c8 = measure(loss_ordering);
  report(5, "piece conservation", measure(conservation));
  report(6, "energy ordering", c6);
  report(7, "reconfiguration gap", c7);
  report(8, "loss ordering", c8);
  report(9, "latency behavior", measure(latency_behavior));
  report(10, "determinism", measure(determinism));

  std::printf("%s: %d of 10 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
