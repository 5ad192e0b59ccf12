/* C interface to the arena simulation core.
 *
 * All functions return a status code:
 *   0  ok
 *   1  configuration error
 *   2  runtime contract violation
 *   3  gradient-check failure
 * arena_last_error() describes the most recent failure on this thread.
 */
#ifndef ARENA_ARENA_H
#define ARENA_ARENA_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct arena_config arena_config;

enum {
    ARENA_OK = 0,
    ARENA_ERR_CONFIG = 1,
    ARENA_ERR_CONTRACT = 2,
    ARENA_ERR_GRADCHECK = 3
};

/* Builds a named preset configuration. Caller owns the handle. */
int arena_config_preset(const char* name, arena_config** out);

/* Starts from defaults (or *inout when non-null) and applies a config file. */
int arena_config_load(const char* path, arena_config** inout);

/* Overrides one flat `key = value` entry. */
int arena_config_set(arena_config* cfg, const char* key, const char* value);

void arena_config_free(arena_config* cfg);

/* Runs n_seeds independent seeded runs, at most `parallel` concurrently,
 * writing episodes.csv / summary.csv / probe files under out_dir (falls back
 * to the config's out_dir when null). */
int arena_run(const arena_config* cfg, const char* out_dir, int n_seeds, int parallel);

/* Finite-difference gradient suites; ARENA_ERR_GRADCHECK on any mismatch. */
int arena_check_gradients(int trials);

/* Rebuilds probe.csv from stored probe_events.csv files under in_dir. */
int arena_probe(const char* in_dir, const char* out_path);

/* Message for the last failing call on the calling thread. */
const char* arena_last_error(void);

#ifdef __cplusplus
}
#endif

#endif /* ARENA_ARENA_H */
