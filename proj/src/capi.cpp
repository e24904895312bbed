#include "iiotfwd/iiotfwd.h"

#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "engine.hpp"
#include "runner.hpp"

using namespace iiotfwd;

struct iiot_scenario {
  ScenarioConfig cfg;
};

struct iiot_metrics {
  Metrics m;
};

struct iiot_manifest {
  RunManifest m;
};

namespace {

thread_local std::string last_error;

iiot_status fail(iiot_status code, std::string what) {
  last_error = std::move(what);
  return code;
}

char* dup(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string describe(const ScenarioError& e) {
  std::string out;
  if (e.line() > 0) out += "line " + std::to_string(e.line()) + ": ";
  if (!e.field().empty()) out += e.field() + ": ";
  return out + e.what();
}

// Maps exceptions from the core onto status codes.
template <class F>
iiot_status guarded(F&& f) {
  try {
    last_error.clear();
    return f();
  } catch (const ScenarioError& e) {
    return fail(IIOT_ERR_PARSE, describe(e));
  } catch (const IoError& e) {
    return fail(IIOT_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(IIOT_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return fail(IIOT_ERR_RUNTIME, e.what());
  }
}

iiot_status write_file(const std::string& path, auto&& writer) {
  std::ofstream os(path, std::ios::binary);
  if (!os) return fail(IIOT_ERR_IO, "cannot write " + path);
  writer(os);
  os.close();
  if (!os) return fail(IIOT_ERR_IO, "failed writing " + path);
  return IIOT_OK;
}

nlohmann::json findings_json(const std::vector<Finding>& findings) {
  auto list = nlohmann::json::array();
  for (const auto& f : findings) list.push_back({{"field", f.field}, {"message", f.message}});
  return {{"valid", findings.empty()}, {"findings", list}};
}

std::vector<Strategy> strategies_from(const char* list) {
  std::vector<Strategy> out;
  std::string text(list);
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    std::string item = text.substr(pos, comma - pos);
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) {
      auto s = parse_strategy(item);
      if (!s) throw ScenarioError(0, "strategy", "unknown strategy '" + item + "'");
      out.push_back(*s);
    }
    pos = comma + 1;
  }
  if (out.empty()) throw ScenarioError(0, "strategy", "no strategy given");
  return out;
}

}  // namespace

extern "C" {

const char* iiot_last_error(void) { return last_error.c_str(); }

const char* iiot_version(void) { return "1.0.0"; }

void iiot_string_free(char* s) { delete[] s; }

iiot_status iiot_scenario_default(iiot_scenario** out) {
  if (!out) return fail(IIOT_ERR_ARGUMENT, "null output handle");
  return guarded([&] {
    *out = new iiot_scenario{};
    return IIOT_OK;
  });
}

iiot_status iiot_scenario_load(const char* path, iiot_scenario** out) {
  if (!path || !out) return fail(IIOT_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    std::ifstream probe(path);
    if (!probe) return fail(IIOT_ERR_IO, std::string("cannot read ") + path);
    *out = new iiot_scenario{load_scenario(path)};
    return IIOT_OK;
  });
}

iiot_status iiot_scenario_parse(const char* text, iiot_scenario** out) {
  if (!text || !out) return fail(IIOT_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new iiot_scenario{parse_scenario(text)};
    return IIOT_OK;
  });
}

iiot_status iiot_scenario_set(iiot_scenario* s, const char* key, const char* value) {
  if (!s || !key || !value) return fail(IIOT_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    ScenarioConfig copy = s->cfg;
    set_option(copy, key, value);
    s->cfg = std::move(copy);
    return IIOT_OK;
  });
}

iiot_status iiot_scenario_validate(const iiot_scenario* s, char** report_json, int* findings) {
  if (!s) return fail(IIOT_ERR_ARGUMENT, "null scenario");
  return guarded([&] {
    auto list = validate_scenario(s->cfg);
    if (findings) *findings = static_cast<int>(list.size());
    if (report_json) *report_json = dup(findings_json(list).dump(2));
    if (!list.empty()) return fail(IIOT_ERR_VALIDATION, list.front().field + ": " + list.front().message);
    return IIOT_OK;
  });
}

void iiot_scenario_free(iiot_scenario* s) { delete s; }

iiot_status iiot_simulate(const iiot_scenario* s, const char* strategy, uint64_t seed, int trace,
                          iiot_metrics** out) {
  if (!s || !strategy || !out) return fail(IIOT_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  auto st = parse_strategy(strategy);
  if (!st) return fail(IIOT_ERR_ARGUMENT, std::string("unknown strategy '") + strategy + "'");
  return guarded([&] {
    if (auto list = validate_scenario(s->cfg); !list.empty()) {
      return fail(IIOT_ERR_VALIDATION, list.front().field + ": " + list.front().message);
    }
    *out = new iiot_metrics{run_simulation(s->cfg, *st, seed, RunOptions{trace != 0, false})};
    return IIOT_OK;
  });
}

iiot_status iiot_metrics_totals(const iiot_metrics* m, iiot_totals* out) {
  if (!m || !out) return fail(IIOT_ERR_ARGUMENT, "null argument");
  const auto& last = m->m.last();
  *out = iiot_totals{last.energy_data_j,
                     last.energy_cfg_j,
                     last.generated,
                     last.delivered,
                     last.lost,
                     last.in_transit,
                     m->m.max_latency_ms,
                     m->m.latency_violations,
                     last.reconfigs,
                     m->m.deaths.size(),
                     m->m.conservation_failures};
  return IIOT_OK;
}

size_t iiot_metrics_cycles(const iiot_metrics* m) { return m ? m->m.series.size() : 0; }

iiot_status iiot_metrics_record(const iiot_metrics* m, size_t index, iiot_cycle_record* out) {
  if (!m || !out) return fail(IIOT_ERR_ARGUMENT, "null argument");
  if (index >= m->m.series.size()) return fail(IIOT_ERR_ARGUMENT, "record index out of range");
  const auto& r = m->m.series[index];
  *out = iiot_cycle_record{r.cycle,     r.energy_data_j,  r.energy_cfg_j, r.generated, r.delivered,
                           r.lost,      r.in_transit,     r.max_latency_ms, r.reconfigs, r.alive_nodes};
  return IIOT_OK;
}

iiot_status iiot_metrics_summary_json(const iiot_metrics* m, char** out) {
  if (!m || !out) return fail(IIOT_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    *out = dup(summary_json(m->m).dump(2));
    return IIOT_OK;
  });
}

iiot_status iiot_metrics_write_csv(const iiot_metrics* m, const char* path) {
  if (!m || !path) return fail(IIOT_ERR_ARGUMENT, "null argument");
  return guarded([&] { return write_file(path, [&](std::ostream& os) { write_series_csv(os, m->m); }); });
}

iiot_status iiot_metrics_write_summary(const iiot_metrics* m, const char* path) {
  if (!m || !path) return fail(IIOT_ERR_ARGUMENT, "null argument");
  return guarded(
      [&] { return write_file(path, [&](std::ostream& os) { os << summary_json(m->m).dump(2) << '\n'; }); });
}

iiot_status iiot_metrics_write_trace(const iiot_metrics* m, const char* path) {
  if (!m || !path) return fail(IIOT_ERR_ARGUMENT, "null argument");
  return guarded([&] { return write_file(path, [&](std::ostream& os) { write_trace(os, m->m); }); });
}

void iiot_metrics_free(iiot_metrics* m) { delete m; }

iiot_status iiot_manifest_create(const iiot_scenario* s, const char* out_dir, iiot_manifest** out) {
  if (!s || !out_dir || !out) return fail(IIOT_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new iiot_manifest{manifest_from(s->cfg, out_dir)};
    return IIOT_OK;
  });
}

iiot_status iiot_manifest_set_strategies(iiot_manifest* m, const char* list) {
  if (!m || !list) return fail(IIOT_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    m->m.strategies = strategies_from(list);
    return IIOT_OK;
  });
}

iiot_status iiot_manifest_set_seeds(iiot_manifest* m, const char* list) {
  if (!m || !list) return fail(IIOT_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    m->m.seeds = parse_seed_list(list);
    return IIOT_OK;
  });
}

iiot_status iiot_manifest_set_trace(iiot_manifest* m, int on) {
  if (!m) return fail(IIOT_ERR_ARGUMENT, "null manifest");
  m->m.trace = on != 0;
  return IIOT_OK;
}

iiot_status iiot_manifest_set_full_horizon(iiot_manifest* m, int on) {
  if (!m) return fail(IIOT_ERR_ARGUMENT, "null manifest");
  m->m.full_horizon = on != 0;
  return IIOT_OK;
}

iiot_status iiot_manifest_set_jobs(iiot_manifest* m, unsigned jobs) {
  if (!m) return fail(IIOT_ERR_ARGUMENT, "null manifest");
  m->m.jobs = jobs;
  return IIOT_OK;
}

iiot_status iiot_manifest_set_sweep(iiot_manifest* m, const char* key, const char* values) {
  if (!m || !key || !values) return fail(IIOT_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    ScenarioConfig copy = m->m.cfg;
    set_option(copy, "run.sweep_key", key);
    set_option(copy, "run.sweep_values", values);
    m->m.cfg = std::move(copy);
    return IIOT_OK;
  });
}

iiot_status iiot_manifest_run(const iiot_manifest* m, char** report_json) {
  if (!m) return fail(IIOT_ERR_ARGUMENT, "null manifest");
  return guarded([&] {
    ScenarioConfig check = m->m.cfg;
    check.strategies = m->m.strategies;
    check.seeds = m->m.seeds;
    check.full_horizon = m->m.full_horizon;
    if (auto list = validate_scenario(check); !list.empty()) {
      return fail(IIOT_ERR_VALIDATION, list.front().field + ": " + list.front().message);
    }
    RunReport report = run_manifest(m->m);
    if (report_json) {
      auto runs = nlohmann::json::array();
      for (const auto& t : report.runs) {
        runs.push_back({{"strategy", strategy_name(t.strategy)},
                        {"seed", t.seed},
                        {"energy_data_J", t.energy_data_j},
                        {"energy_cfg_J", t.energy_cfg_j},
                        {"generated", t.generated},
                        {"delivered", t.delivered},
                        {"lost", t.lost},
                        {"max_latency_ms", t.max_latency_ms},
                        {"latency_violations", t.latency_violations},
                        {"reconfigs", t.reconfigs},
                        {"deaths", t.deaths}});
      }
      auto files = nlohmann::json::array();
      for (const auto& f : report.files) files.push_back(f.string());
      *report_json = dup(nlohmann::json{{"runs", runs}, {"files", files}}.dump(2));
    }
    return IIOT_OK;
  });
}

void iiot_manifest_free(iiot_manifest* m) { delete m; }

}  // extern "C"
