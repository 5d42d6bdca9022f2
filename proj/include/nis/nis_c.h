/* C interface to the neural input search library. All functions return a
 * status code; nis_last_error() carries the message for the most recent
 * failure on the calling thread. Handles are opaque and freed by their
 * matching *_free function. */
#ifndef NIS_C_H
#define NIS_C_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nis_status {
  NIS_OK = 0,
  NIS_E_CONFIG = 1,   /* schema violation or inconsistent configuration */
  NIS_E_IO = 2,       /* missing or unreadable file, write failure, held lock */
  NIS_E_INVALID = 3,  /* contract violation in the arguments */
  NIS_E_NUMERIC = 4,  /* non-finite values during computation */
  NIS_E_INTERNAL = 5
} nis_status;

typedef struct nis_config nis_config; /* opaque; a validated run configuration */

/* Loads and validates a config file (strict schema; unknown keys are errors). */
nis_status nis_config_load(const char* path, nis_config** out);
/* Same, from an in-memory JSON document. */
nis_status nis_config_load_json(const char* json_text, nis_config** out);
void nis_config_free(nis_config* cfg);
/* Overrides the run seed (CLI --seed). */
nis_status nis_config_set_seed(nis_config* cfg, uint64_t seed);

/* Each run verb writes its artifacts under out_dir (fixed names, see the
 * library README) and holds out_dir/.lock while writing. */
nis_status nis_run_gen_data(const nis_config* cfg, const char* out_dir);
nis_status nis_run_search(const nis_config* cfg, const char* out_dir);
nis_status nis_run_oracle_sweep(const nis_config* cfg, const char* out_dir);
nis_status nis_run_evaluate(const nis_config* cfg, const char* architecture_path,
                            const char* out_dir);

/* Comparison report over completed run directories. */
nis_status nis_report(const char* const* run_dirs, size_t n_dirs, const char* out_dir);

/* Message of the last failing call on this thread ("" when none). The
 * pointer stays valid until the next failing call on the same thread. */
const char* nis_last_error(void);

const char* nis_version(void);

#ifdef __cplusplus
}
#endif

#endif /* NIS_C_H */
