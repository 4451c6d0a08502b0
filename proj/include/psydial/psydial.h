#ifndef PSYDIAL_PSYDIAL_H
#define PSYDIAL_PSYDIAL_H

/*
 * C interface to the psydial engine.
 *
 * Every call returns a psyd_status. On failure a message describing the
 * error is available from psyd_last_error() on the same thread until the
 * next call. Strings returned through `char**` out-parameters are owned by
 * the caller and released with psyd_string_free(). Structured results are
 * JSON documents.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(PSYD_BUILDING_LIBRARY)
#define PSYD_API __attribute__((visibility("default")))
#else
#define PSYD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum psyd_status {
  PSYD_OK = 0,
  /* Malformed or invariant-breaking input (definitions, EMRs, corpora). */
  PSYD_ERR_INVALID = 1,
  /* Bad arguments or configuration. */
  PSYD_ERR_USAGE = 2,
  PSYD_ERR_IO = 3,
  /* The remote text backend failed or is misconfigured. */
  PSYD_ERR_BACKEND = 4,
  /* Call not allowed in the handle's current state. */
  PSYD_ERR_STATE = 5,
  PSYD_ERR_INTERNAL = 6
} psyd_status;

typedef struct psyd_config psyd_config;
typedef struct psyd_machine psyd_machine;
typedef struct psyd_runtime psyd_runtime;

PSYD_API const char* psyd_version(void);
PSYD_API const char* psyd_last_error(void);
PSYD_API void psyd_string_free(char* s);

/* ---- configuration ---- */

/*
 * Builds the effective configuration: defaults, then the PSYD_DATA_DIR
 * environment variable, then the JSON file at `config_path` (may be NULL),
 * then `overrides_json` (a JSON object, may be NULL).
 */
PSYD_API psyd_status psyd_config_resolve(const char* config_path, const char* overrides_json, psyd_config** out);
PSYD_API psyd_status psyd_config_json(const psyd_config* cfg, char** out_json);
PSYD_API void psyd_config_free(psyd_config* cfg);

/* ---- single machines ---- */

/* Loads and validates one machine definition file. */
PSYD_API psyd_status psyd_machine_load(const char* path, psyd_machine** out);
PSYD_API void psyd_machine_free(psyd_machine* m);
/* Terminal codes reachable by exhaustive enumeration, as a JSON array. */
PSYD_API psyd_status psyd_machine_terminals(const psyd_machine* m, char** out_json);

PSYD_API psyd_status psyd_runtime_new(const psyd_machine* m, uint64_t seed, psyd_runtime** out);
PSYD_API void psyd_runtime_free(psyd_runtime* rt);
/* Id of the node awaiting an answer; PSYD_ERR_STATE once terminated. */
PSYD_API psyd_status psyd_runtime_current(const psyd_runtime* rt, char** out_node_id);
/* Question text for the current node. */
PSYD_API psyd_status psyd_runtime_question(const psyd_runtime* rt, char** out_text);
PSYD_API psyd_status psyd_runtime_answer(psyd_runtime* rt, int present);
/* Sets *out to 1 and *out_code to the terminal code when terminated; else 0. */
PSYD_API psyd_status psyd_runtime_terminal(const psyd_runtime* rt, int* out, char** out_code);

/* ---- workflows ---- */

/*
 * Validates machine definitions and EMR files. `paths` may be empty, in
 * which case the configured machines, context tree and EMRs are checked.
 * Returns PSYD_ERR_INVALID when any issue was found; the report is written
 * in either case.
 */
PSYD_API psyd_status psyd_validate(const psyd_config* cfg, const char* const* paths, size_t n_paths, char** out_report);

/*
 * Runs a generation job from the configuration. The summary is written
 * even when some sessions failed; PSYD_ERR_BACKEND then signals that at
 * least one failure came from the backend.
 */
PSYD_API psyd_status psyd_generate(const psyd_config* cfg, char** out_summary);

/*
 * Scores a corpus against gold labels (`gold_path` NULL: the configured
 * EMRs). `baseline_path` may name a second corpus for the McNemar test;
 * otherwise the two strategies of the corpus are compared when both are
 * present. `flags` is a bit set of PSYD_EVAL_* values.
 */
#define PSYD_EVAL_STATS 1u
#define PSYD_EVAL_DIVERSITY 2u
PSYD_API psyd_status psyd_eval(const psyd_config* cfg, const char* corpus_path, const char* gold_path,
                               const char* baseline_path, unsigned flags, char** out_report);

/* Corpus statistics, with diversity metrics when `diversity` is nonzero. */
PSYD_API psyd_status psyd_stats(const psyd_config* cfg, const char* corpus_path, int diversity, char** out_report);

#ifdef __cplusplus
}
#endif

#endif
