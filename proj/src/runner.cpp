#include "runner.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <thread>

#include "engine.hpp"

namespace iiotfwd {

namespace fs = std::filesystem;

std::string strategy_slug(Strategy s) {
  std::string out = strategy_name(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

RunManifest manifest_from(const ScenarioConfig& cfg, fs::path out_dir) {
  RunManifest m;
  m.cfg = cfg;
  m.strategies = cfg.strategies;
  m.seeds = cfg.seeds;
  m.out_dir = std::move(out_dir);
  m.trace = cfg.trace;
  m.full_horizon = cfg.full_horizon;
  return m;
}

namespace {

unsigned worker_count(unsigned jobs, std::size_t tasks) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(tasks, 1)));
}

// Calls f(i) for i in [0, n) on `jobs` threads; the first exception wins.
template <class F>
void parallel_for(std::size_t n, unsigned jobs, F&& f) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned workers = worker_count(jobs, n);
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  return os;
}

void close_out(std::ofstream& os, const fs::path& path) {
  os.close();
  if (!os) throw IoError("failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

struct RunResult {
  RunTotals totals;
  std::vector<CycleRecord> samples;  // every stride-th cycle plus the last
  std::vector<fs::path> files;
};

RunResult run_one(const ScenarioConfig& cfg, Strategy s, std::uint64_t seed, bool trace, std::uint64_t stride,
                  const fs::path& dir) {
  Metrics m = run_simulation(cfg, s, seed, RunOptions{trace, false});
  RunResult r;
  r.totals = totals_of(m);
  for (const auto& rec : m.series) {
    if (rec.cycle % stride == 0 || &rec == &m.series.back()) r.samples.push_back(rec);
  }
  const std::string stem = strategy_slug(s) + "_seed" + std::to_string(seed);

  fs::path csv = dir / (stem + ".csv");
  auto os = open_out(csv);
  write_series_csv(os, m);
  close_out(os, csv);
  r.files.push_back(csv);

  fs::path summary = dir / (stem + ".json");
  os = open_out(summary);
  os << summary_json(m).dump(2) << '\n';
  close_out(os, summary);
  r.files.push_back(summary);

  if (trace) {
    fs::path tr = dir / (stem + ".trace");
    os = open_out(tr);
    write_trace(os, m);
    close_out(os, tr);
    r.files.push_back(tr);
  }
  return r;
}

struct Mean {
  double energy_data = 0, energy_cfg = 0, generated = 0, delivered = 0, lost = 0, max_latency = 0;
  double violations = 0, reconfigs = 0, deaths = 0;
  std::size_t runs = 0;

  void add(const RunTotals& t) {
    energy_data += t.energy_data_j;
    energy_cfg += t.energy_cfg_j;
    generated += static_cast<double>(t.generated);
    delivered += static_cast<double>(t.delivered);
    lost += static_cast<double>(t.lost);
    max_latency += t.max_latency_ms;
    violations += static_cast<double>(t.latency_violations);
    reconfigs += static_cast<double>(t.reconfigs);
    deaths += static_cast<double>(t.deaths);
    ++runs;
  }
  double avg(double v) const { return runs ? v / static_cast<double>(runs) : 0.0; }
};

std::vector<std::pair<Strategy, Mean>> means_by_strategy(const std::vector<RunTotals>& runs) {
  std::vector<std::pair<Strategy, Mean>> out;
  for (const auto& t : runs) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == t.strategy; });
    if (it == out.end()) {
      out.emplace_back(t.strategy, Mean{});
      it = out.end() - 1;
    }
    it->second.add(t);
  }
  return out;
}

void write_series_mean(std::ostream& os, const std::vector<Strategy>& strategies,
                       const std::vector<RunResult>& results, std::size_t seeds) {
  os << "cycle";
  for (Strategy s : strategies) {
    const std::string p = strategy_slug(s);
    os << ',' << p << "_energy_J," << p << "_energy_cfg_J," << p << "_lost," << p << "_max_latency_ms";
  }
  os << '\n' << std::setprecision(10);
  const std::size_t rows = results.empty() ? 0 : results.front().samples.size();
  for (std::size_t k = 0; k < rows; ++k) {
    os << results.front().samples[k].cycle;
    for (std::size_t si = 0; si < strategies.size(); ++si) {
      double energy = 0, cfg = 0, lost = 0, latency = 0;
      for (std::size_t j = 0; j < seeds; ++j) {
        const auto& rec = results[si * seeds + j].samples[k];
        energy += rec.energy_data_j + rec.energy_cfg_j;
        cfg += rec.energy_cfg_j;
        lost += static_cast<double>(rec.lost);
        latency += rec.max_latency_ms;
      }
      const double n = static_cast<double>(seeds);
      os << ',' << energy / n << ',' << cfg / n << ',' << lost / n << ',' << latency / n;
    }
    os << '\n';
  }
}

void check_manifest(const RunManifest& m) {
  if (m.strategies.empty()) throw ScenarioError(0, "run.strategies", "at least one strategy is required");
  if (m.seeds.empty()) throw ScenarioError(0, "run.seeds", "at least one seed is required");
  if (m.series_stride == 0) throw ScenarioError(0, "series_stride", "must be positive");
}

// Runs the grid for one configuration into `dir`.
std::vector<RunResult> run_point(const ScenarioConfig& cfg, const RunManifest& m, const fs::path& dir) {
  if (auto findings = validate_scenario(cfg); !findings.empty()) {
    throw ScenarioError(0, findings.front().field, findings.front().message);
  }
  ensure_dir(dir);
  const std::size_t n = m.strategies.size() * m.seeds.size();
  std::vector<RunResult> results(n);
  parallel_for(n, m.jobs, [&](std::size_t i) {
    const Strategy s = m.strategies[i / m.seeds.size()];
    const std::uint64_t seed = m.seeds[i % m.seeds.size()];
    results[i] = run_one(cfg, s, seed, m.trace, m.series_stride, dir);
  });

  std::vector<RunTotals> totals;
  for (const auto& r : results) totals.push_back(r.totals);
  fs::path cmp = dir / "comparison.csv";
  auto os = open_out(cmp);
  write_comparison_csv(os, totals);
  close_out(os, cmp);

  fs::path series = dir / "series_mean.csv";
  os = open_out(series);
  write_series_mean(os, m.strategies, results, m.seeds.size());
  close_out(os, series);
  return results;
}

}  // namespace

void write_comparison_csv(std::ostream& os, const std::vector<RunTotals>& runs) {
  os << "strategy,runs,energy_data_J,energy_cfg_J,energy_total_J,generated,delivered,lost,loss_rate,"
        "max_latency_ms,latency_violations,reconfigs,deaths\n";
  os << std::setprecision(10);
  for (const auto& [s, m] : means_by_strategy(runs)) {
    const double rate = m.generated > 0 ? m.lost / m.generated : 0.0;
    os << strategy_name(s) << ',' << m.runs << ',' << m.avg(m.energy_data) << ',' << m.avg(m.energy_cfg) << ','
       << m.avg(m.energy_data + m.energy_cfg) << ',' << m.avg(m.generated) << ',' << m.avg(m.delivered) << ','
       << m.avg(m.lost) << ',' << rate << ',' << m.avg(m.max_latency) << ',' << m.avg(m.violations) << ','
       << m.avg(m.reconfigs) << ',' << m.avg(m.deaths) << '\n';
  }
}

std::vector<Metrics> run_grid(const ScenarioConfig& cfg, const std::vector<Strategy>& strategies,
                              const std::vector<std::uint64_t>& seeds, bool trace, unsigned jobs) {
  const std::size_t n = strategies.size() * seeds.size();
  std::vector<Metrics> out(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    out[i] = run_simulation(cfg, strategies[i / seeds.size()], seeds[i % seeds.size()], RunOptions{trace, false});
  });
  return out;
}

RunReport run_manifest(const RunManifest& manifest) {
  check_manifest(manifest);
  ScenarioConfig base = manifest.cfg;
  base.full_horizon = manifest.full_horizon;
  ensure_dir(manifest.out_dir);

  RunReport report;
  auto collect = [&](std::vector<RunResult>& results) {
    for (auto& r : results) {
      report.runs.push_back(r.totals);
      report.files.insert(report.files.end(), r.files.begin(), r.files.end());
    }
  };

  if (base.sweep_key.empty()) {
    auto results = run_point(base, manifest, manifest.out_dir);
    collect(results);
    report.files.push_back(manifest.out_dir / "comparison.csv");
    report.files.push_back(manifest.out_dir / "series_mean.csv");
    return report;
  }

  fs::path sweep_path = manifest.out_dir / "sweep.csv";
  fs::path runs_path = manifest.out_dir / "sweep_runs.csv";
  auto sweep = open_out(sweep_path);
  auto sweep_runs = open_out(runs_path);
  sweep << "value,strategy,runs,energy_cfg_J,energy_total_J,lost,reconfigs\n" << std::setprecision(10);
  sweep_runs << "value,strategy,seed,energy_cfg_J,energy_total_J,lost,reconfigs\n" << std::setprecision(10);
  for (const auto& value : base.sweep_values) {
    ScenarioConfig cfg = base;
    set_option(cfg, base.sweep_key, value);
    const fs::path dir = manifest.out_dir / (base.sweep_key + "=" + value);
    auto results = run_point(cfg, manifest, dir);
    std::vector<RunTotals> totals;
    for (const auto& r : results) {
      totals.push_back(r.totals);
      const auto& t = r.totals;
      sweep_runs << value << ',' << strategy_name(t.strategy) << ',' << t.seed << ',' << t.energy_cfg_j << ','
                 << t.energy_total_j() << ',' << t.lost << ',' << t.reconfigs << '\n';
    }
    for (const auto& [s, m] : means_by_strategy(totals)) {
      sweep << value << ',' << strategy_name(s) << ',' << m.runs << ',' << m.avg(m.energy_cfg) << ','
            << m.avg(m.energy_data + m.energy_cfg) << ',' << m.avg(m.lost) << ',' << m.avg(m.reconfigs) << '\n';
    }
    collect(results);
    report.files.push_back(dir / "comparison.csv");
    report.files.push_back(dir / "series_mean.csv");
  }
  close_out(sweep, sweep_path);
  close_out(sweep_runs, runs_path);
  report.files.push_back(sweep_path);
  report.files.push_back(runs_path);
  return report;
}

}  // namespace iiotfwd
