#ifndef IIOTFWD_H
#define IIOTFWD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define IIOT_API __declspec(dllexport)
#else
#define IIOT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum iiot_status {
  IIOT_OK = 0,
  IIOT_ERR_ARGUMENT = 1,   /* null handle or unknown name */
  IIOT_ERR_PARSE = 2,      /* scenario text or option value rejected */
  IIOT_ERR_VALIDATION = 3, /* scenario parsed but failed validation */
  IIOT_ERR_IO = 4,
  IIOT_ERR_RUNTIME = 5
} iiot_status;

typedef struct iiot_scenario iiot_scenario;
typedef struct iiot_metrics iiot_metrics;
typedef struct iiot_manifest iiot_manifest;

typedef struct iiot_totals {
  double energy_data_j;
  double energy_cfg_j;
  uint64_t generated;
  uint64_t delivered;
  uint64_t lost;
  uint64_t in_transit;
  double max_latency_ms;
  uint64_t latency_violations;
  uint64_t reconfigs;
  uint64_t deaths;
  uint64_t conservation_failures;
} iiot_totals;

typedef struct iiot_cycle_record {
  uint64_t cycle;
  double energy_data_j;
  double energy_cfg_j;
  uint64_t generated;
  uint64_t delivered;
  uint64_t lost;
  uint64_t in_transit;
  double max_latency_ms;
  uint64_t reconfigs;
  uint64_t alive_nodes;
} iiot_cycle_record;

/* Message of the last failed call on this thread; empty when none. */
IIOT_API const char* iiot_last_error(void);
IIOT_API const char* iiot_version(void);
/* Frees strings returned through char** out-parameters. */
IIOT_API void iiot_string_free(char* s);

IIOT_API iiot_status iiot_scenario_default(iiot_scenario** out);
IIOT_API iiot_status iiot_scenario_load(const char* path, iiot_scenario** out);
IIOT_API iiot_status iiot_scenario_parse(const char* text, iiot_scenario** out);
/* key is "section.key", e.g. "timing.horizon". */
IIOT_API iiot_status iiot_scenario_set(iiot_scenario* s, const char* key, const char* value);
/* JSON report {"valid": bool, "findings": [{"field", "message"}]}; *findings gets the count. */
IIOT_API iiot_status iiot_scenario_validate(const iiot_scenario* s, char** report_json, int* findings);
IIOT_API void iiot_scenario_free(iiot_scenario* s);

/* strategy: "pdd", "pdd-cr" or "distrdatafwd". */
IIOT_API iiot_status iiot_simulate(const iiot_scenario* s, const char* strategy, uint64_t seed, int trace,
                                   iiot_metrics** out);
IIOT_API iiot_status iiot_metrics_totals(const iiot_metrics* m, iiot_totals* out);
IIOT_API size_t iiot_metrics_cycles(const iiot_metrics* m);
IIOT_API iiot_status iiot_metrics_record(const iiot_metrics* m, size_t index, iiot_cycle_record* out);
IIOT_API iiot_status iiot_metrics_summary_json(const iiot_metrics* m, char** out);
IIOT_API iiot_status iiot_metrics_write_csv(const iiot_metrics* m, const char* path);
IIOT_API iiot_status iiot_metrics_write_summary(const iiot_metrics* m, const char* path);
IIOT_API iiot_status iiot_metrics_write_trace(const iiot_metrics* m, const char* path);
IIOT_API void iiot_metrics_free(iiot_metrics* m);

/* Starts from the scenario's [run] section. */
IIOT_API iiot_status iiot_manifest_create(const iiot_scenario* s, const char* out_dir, iiot_manifest** out);
/* Comma-separated names. */
IIOT_API iiot_status iiot_manifest_set_strategies(iiot_manifest* m, const char* list);
/* "1-10" or "1,4,7". */
IIOT_API iiot_status iiot_manifest_set_seeds(iiot_manifest* m, const char* list);
IIOT_API iiot_status iiot_manifest_set_trace(iiot_manifest* m, int on);
IIOT_API iiot_status iiot_manifest_set_full_horizon(iiot_manifest* m, int on);
IIOT_API iiot_status iiot_manifest_set_jobs(iiot_manifest* m, unsigned jobs);
/* key "section.key" and comma-separated values; an empty key turns sweeping off. */
IIOT_API iiot_status iiot_manifest_set_sweep(iiot_manifest* m, const char* key, const char* values);
/* Writes all outputs; report_json (may be NULL) lists per-run totals and files. */
IIOT_API iiot_status iiot_manifest_run(const iiot_manifest* m, char** report_json);
IIOT_API void iiot_manifest_free(iiot_manifest* m);

#ifdef __cplusplus
}
#endif

#endif
