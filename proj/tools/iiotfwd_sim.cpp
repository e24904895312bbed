// Command-line driver. Talks to the simulator only through the C API.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "iiotfwd/iiotfwd.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

int exit_code(iiot_status st) {
  switch (st) {
    case IIOT_OK: return kExitOk;
    case IIOT_ERR_PARSE:
    case IIOT_ERR_VALIDATION:
    case IIOT_ERR_ARGUMENT: return kExitValidation;
    default: return kExitRuntime;
  }
}

int report(iiot_status st, const std::string& context) {
  std::cerr << "iiotfwd_sim: " << context << ": " << iiot_last_error() << '\n';
  return exit_code(st);
}

struct Scenario {
  iiot_scenario* h = nullptr;
  ~Scenario() { iiot_scenario_free(h); }
};

struct Manifest {
  iiot_manifest* h = nullptr;
  ~Manifest() { iiot_manifest_free(h); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-aware data forwarding simulator"};
  app.set_version_flag("--version", std::string(iiot_version()));

  std::string scenario_path;
  std::string strategies;
  std::string seeds;
  std::string out_dir = "out";
  std::string sweep;
  std::vector<std::string> overrides;
  bool trace = false;
  bool full_horizon = false;
  bool validate_only = false;
  unsigned jobs = 0;

  app.add_option("scenario", scenario_path, "Scenario file")->required();
  app.add_option("--strategy", strategies, "Comma-separated: pdd, pdd-cr, distrdatafwd (default: scenario [run])");
  app.add_option("--seeds", seeds, "Seed list such as 1-10 or 1,3,5 (default: scenario [run])");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_flag("--trace", trace, "Write the message trace of every run");
  app.add_flag("--full-horizon", full_horizon, "Run the full reference horizon instead of the desk-scale one");
  app.add_flag("--validate-only", validate_only, "Print the validation report and exit");
  app.add_option("--sweep", sweep, "section.key=v1,v2,... runs the grid once per value");
  app.add_option("--set", overrides, "section.key=value override, repeatable");
  app.add_option("--jobs", jobs, "Parallel runs (0 = all cores)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  }

  Scenario scenario;
  if (auto st = iiot_scenario_load(scenario_path.c_str(), &scenario.h); st != IIOT_OK) {
    return report(st, scenario_path);
  }
  for (const auto& kv : overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "iiotfwd_sim: --set expects section.key=value, got '" << kv << "'\n";
      return kExitValidation;
    }
    if (auto st = iiot_scenario_set(scenario.h, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()); st != IIOT_OK) {
      return report(st, "--set " + kv);
    }
  }
  if (full_horizon) {
    if (auto st = iiot_scenario_set(scenario.h, "run.full_horizon", "true"); st != IIOT_OK) {
      return report(st, "--full-horizon");
    }
  }

  char* validation = nullptr;
  int findings = 0;
  iiot_status vst = iiot_scenario_validate(scenario.h, &validation, &findings);
  if (validate_only || vst != IIOT_OK) {
    if (validation) std::cout << validation << '\n';
    iiot_string_free(validation);
    if (vst == IIOT_ERR_VALIDATION) return kExitValidation;
    if (vst != IIOT_OK) return report(vst, "validate");
    return kExitOk;
  }
  iiot_string_free(validation);

  Manifest manifest;
  if (auto st = iiot_manifest_create(scenario.h, out_dir.c_str(), &manifest.h); st != IIOT_OK) {
    return report(st, "manifest");
  }
  if (!strategies.empty()) {
    if (auto st = iiot_manifest_set_strategies(manifest.h, strategies.c_str()); st != IIOT_OK) {
      return report(st, "--strategy");
    }
  }
  if (!seeds.empty()) {
    if (auto st = iiot_manifest_set_seeds(manifest.h, seeds.c_str()); st != IIOT_OK) return report(st, "--seeds");
  }
  if (!sweep.empty()) {
    auto eq = sweep.find('=');
    if (eq == std::string::npos) {
      std::cerr << "iiotfwd_sim: --sweep expects section.key=v1,v2,...\n";
      return kExitValidation;
    }
    if (auto st = iiot_manifest_set_sweep(manifest.h, sweep.substr(0, eq).c_str(), sweep.substr(eq + 1).c_str());
        st != IIOT_OK) {
      return report(st, "--sweep");
    }
  }
  if (trace) iiot_manifest_set_trace(manifest.h, 1);
  if (full_horizon) iiot_manifest_set_full_horizon(manifest.h, 1);
  iiot_manifest_set_jobs(manifest.h, jobs);

  char* run_report = nullptr;
  if (auto st = iiot_manifest_run(manifest.h, &run_report); st != IIOT_OK) return report(st, "run");
  iiot_string_free(run_report);
  std::cout << "wrote results to " << out_dir << '\n';
  return kExitOk;
}
