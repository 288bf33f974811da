/*
 * cpkit — CP tensor decomposition toolkit.
 *
 * C interface to the core library: dense tensors, Kruskal (CP factor)
 * models, synthetic problem generators, ALS and Gauss-Newton optimizers and
 * the experiment runners. All objects are opaque handles owned by the
 * library; every fallible call returns a cpkit_status and leaves a
 * human-readable message retrievable via cpkit_last_error() on failure.
 *
 * Runner configurations are JSON documents; the schemas are documented in
 * the project README. Reports can be serialized to JSON or CSV.
 */

#ifndef CPKIT_H
#define CPKIT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CPKIT_API __declspec(dllexport)
#else
#define CPKIT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cpkit_status {
    CPKIT_OK = 0,
    CPKIT_ERR_INVALID_ARGUMENT = 1,
    CPKIT_ERR_PARSE = 2,
    CPKIT_ERR_IO = 3,
    CPKIT_ERR_SINGULAR = 4,
    CPKIT_ERR_NUMERICAL = 5,
    CPKIT_ERR_LIMIT = 6,
    CPKIT_ERR_INTERNAL = 7
} cpkit_status;

typedef struct cpkit_tensor cpkit_tensor;
typedef struct cpkit_model cpkit_model;
typedef struct cpkit_report cpkit_report;

CPKIT_API const char* cpkit_version(void);
CPKIT_API const char* cpkit_status_name(cpkit_status status);

/* Message for the most recent failure on the calling thread. Valid until the
 * next cpkit call on the same thread. */
CPKIT_API const char* cpkit_last_error(void);

/* Frees strings returned through char** out-parameters. */
CPKIT_API void cpkit_string_free(char* s);

/* ---- dense tensors ----------------------------------------------------- */

/* Row-major data (last index fastest), length = product of dims. */
CPKIT_API cpkit_status cpkit_tensor_create(const uint64_t* dims, uint64_t order,
                                           const double* data,
                                           cpkit_tensor** out);
CPKIT_API cpkit_status cpkit_tensor_load(const char* path, cpkit_tensor** out);
CPKIT_API cpkit_status cpkit_tensor_save(const cpkit_tensor* t,
                                         const char* path);
CPKIT_API uint64_t cpkit_tensor_order(const cpkit_tensor* t);
CPKIT_API uint64_t cpkit_tensor_extent(const cpkit_tensor* t, uint64_t mode);
CPKIT_API uint64_t cpkit_tensor_element_count(const cpkit_tensor* t);
CPKIT_API const double* cpkit_tensor_data(const cpkit_tensor* t);
CPKIT_API void cpkit_tensor_destroy(cpkit_tensor* t);

/* ---- Kruskal models ----------------------------------------------------- */

CPKIT_API cpkit_status cpkit_model_load(const char* path, cpkit_model** out);
CPKIT_API cpkit_status cpkit_model_save(const cpkit_model* m, const char* path);
CPKIT_API uint64_t cpkit_model_order(const cpkit_model* m);
CPKIT_API uint64_t cpkit_model_rank(const cpkit_model* m);
CPKIT_API uint64_t cpkit_model_extent(const cpkit_model* m, uint64_t mode);
/* Row-major factor data for one mode, extent x rank. */
CPKIT_API const double* cpkit_model_factor(const cpkit_model* m, uint64_t mode);
/* Dense evaluation of the model. */
CPKIT_API cpkit_status cpkit_model_reconstruct(const cpkit_model* m,
                                               cpkit_tensor** out);
CPKIT_API void cpkit_model_destroy(cpkit_model* m);

/* ---- generators ---------------------------------------------------------- */

/* spec_json: {"family":"uniform01"|"uniform11"|"uniform"|"gaussian",
 *             "a":..,"b":.., "dims":[..], "rank":R, "seed":S}.
 * Returns the ground-truth model and its reconstruction; either out pointer
 * may be NULL if only one of the two is wanted. */
CPKIT_API cpkit_status cpkit_generate_low_rank(const char* spec_json,
                                               cpkit_model** out_model,
                                               cpkit_tensor** out_tensor);

/* Order-3 tensor of extents n^2 encoding n x n matrix multiplication. */
CPKIT_API cpkit_status cpkit_matmul_tensor(uint64_t n, cpkit_tensor** out);

/* ---- decomposition ------------------------------------------------------- */

/* Runs one optimizer on a caller-supplied tensor.
 * config_json keys: "optimizer" ("als"|"gn"), "als", "gn", plus "rank",
 * "seed" and "init" used to draw the starting point when init is NULL.
 * out_model and out_report may each be NULL. */
CPKIT_API cpkit_status cpkit_decompose(const cpkit_tensor* t,
                                       const char* config_json,
                                       const cpkit_model* init,
                                       cpkit_model** out_model,
                                       cpkit_report** out_report);

/* ---- experiment runners --------------------------------------------------
 * Each takes a JSON configuration (README documents the schemas) and yields
 * a report carrying the fully resolved configuration. */

CPKIT_API cpkit_status cpkit_run_trace(const char* config_json,
                                       cpkit_report** out);
CPKIT_API cpkit_status cpkit_run_likelihood(const char* config_json,
                                            cpkit_report** out);
CPKIT_API cpkit_status cpkit_run_matmul(const char* config_json,
                                        cpkit_report** out);
CPKIT_API cpkit_status cpkit_run_bench_matvec(const char* config_json,
                                              cpkit_report** out);
CPKIT_API cpkit_status cpkit_run_selftest_oracle(const char* config_json,
                                                 cpkit_report** out);

/* ---- reports -------------------------------------------------------------- */

/* format: "csv" or "json"; path "-" writes to stdout. */
CPKIT_API cpkit_status cpkit_report_emit(const cpkit_report* r,
                                         const char* format, const char* path);
CPKIT_API cpkit_status cpkit_report_to_json(const cpkit_report* r,
                                            char** out_json);
/* The fully resolved configuration embedded in the report. */
CPKIT_API cpkit_status cpkit_report_config(const cpkit_report* r,
                                           char** out_json);
/* 1 if the report is a selftest whose checks all passed, or any other kind;
 * 0 if a selftest had failures. */
CPKIT_API int cpkit_report_ok(const cpkit_report* r);
CPKIT_API void cpkit_report_destroy(cpkit_report* r);

#ifdef __cplusplus
}
#endif

#endif /* CPKIT_H */
