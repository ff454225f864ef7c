/* C API for the genmc library: opaque handles, status codes, no C++ types.
 * Status codes double as CLI exit codes. Every failing call leaves a
 * human-readable message in gmc_last_error() (thread-local). */

#ifndef GENMC_CAPI_H
#define GENMC_CAPI_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gmc_status {
    GMC_OK = 0,
    GMC_ERR_IO = 2,         /* missing or unreadable file */
    GMC_ERR_VALIDATION = 3, /* malformed data, bad config or arguments */
    GMC_ERR_NUMERIC = 4     /* non-finite loss or gradient */
} gmc_status;

typedef struct gmc_model gmc_model;     /* a loaded checkpoint */
typedef struct gmc_dataset gmc_dataset; /* examples held in memory */

/* message for the most recent failure on this thread; never NULL */
const char* gmc_last_error(void);

/* ---- datasets ---- */

gmc_status gmc_dataset_load(const char* path, gmc_dataset** out);
long gmc_dataset_size(const gmc_dataset* data);
void gmc_dataset_free(gmc_dataset* data);

/* write a synthetic dataset as JSONL with a parameter header comment;
 * task is "copy" or "twohop"; split is NULL/"" or "train"/"dev"/"test" */
gmc_status gmc_synth(const char* task, long n_examples, long n_options, long vocab_size,
                     uint64_t seed, const char* split, const char* out_path);

/* ---- models ---- */

gmc_status gmc_model_load(const char* checkpoint_dir, gmc_model** out);
void gmc_model_free(gmc_model* model);

gmc_status gmc_evaluate(const gmc_model* model, const gmc_dataset* data, double* accuracy_out);

/* one line per example: id, TAB, detokenized clue text.
 * out_path NULL writes to stdout. Only clue-generating models. */
gmc_status gmc_clue_dump(const gmc_model* model, const gmc_dataset* data, const char* out_path);

/* per-question wall clock with the warm-up question excluded */
typedef struct gmc_bench_result {
    double mean_seconds;
    double std_seconds;
    long n_questions;
    long total_params;
    char config_hash[17];
} gmc_bench_result;

gmc_status gmc_bench(const gmc_model* model, const gmc_dataset* data, gmc_bench_result* out);

/* total parameter count plus a per-group breakdown table;
 * free the table with gmc_string_free */
gmc_status gmc_count_params(const gmc_model* model, long* total_out, char** breakdown_out);

/* ---- training ---- */

typedef struct gmc_train_args {
    const char* model_kind; /* genmc | t2t-vanilla | t2t-enc | weak-clue | token-clue */
    const char* const* train_paths; /* concatenated into one training set */
    long n_train_paths;
    const char* dev_path;
    const char* test_path;   /* optional, may be NULL */
    const char* config_path; /* optional flat key = value file */
    const char* overrides;   /* optional key = value lines, applied last */
    long seed;
    const char* out_dir;     /* run directory: checkpoint/, metrics.txt, ... */
    int grid_search;         /* nonzero: search {1e-4,5e-5,1e-5} x {8,64} */
} gmc_train_args;

typedef struct gmc_train_summary {
    double dev_accuracy;
    double test_accuracy;
    long best_epoch;
    long epochs_run;
    double wall_clock_s;
} gmc_train_summary;

gmc_status gmc_train(const gmc_train_args* args, gmc_train_summary* out);

/* aggregated mean (±std) table over runs_dir/STAR/metrics.txt;
 * free with gmc_string_free */
gmc_status gmc_report(const char* runs_dir, char** table_out);

void gmc_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* GENMC_CAPI_H */
