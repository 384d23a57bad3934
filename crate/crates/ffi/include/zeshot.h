#ifndef ZESHOT_H
#define ZESHOT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every fallible entry point.
 */
typedef enum ZeshotStatus {
  ZESHOT_STATUS_OK = 0,
  ZESHOT_STATUS_NULL_ARGUMENT = 1,
  ZESHOT_STATUS_INVALID_UTF8 = 2,
  ZESHOT_STATUS_INVALID_ARGUMENT = 3,
  ZESHOT_STATUS_BANK = 4,
  ZESHOT_STATUS_GENERATION = 5,
  ZESHOT_STATUS_MATCHING = 6,
  ZESHOT_STATUS_BACKEND = 7,
  ZESHOT_STATUS_DATASET = 8,
  ZESHOT_STATUS_PANIC = 99,
} ZeshotStatus;

/**
 * Opaque pipeline handle.
 */
typedef struct ZeshotPipeline ZeshotPipeline;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string. Do not free.
 */
const char *zeshot_version(void);

/**
 * Message for the last failure on this thread, or NULL if none. The pointer
 * stays valid until the next failing call on the same thread. Do not free.
 */
const char *zeshot_last_error_message(void);

/**
 * Release a string returned through an out-parameter. NULL is ignored.
 *
 * # Safety
 * `s` must be NULL or a pointer obtained from this library and not yet freed.
 */
void zeshot_string_free(char *s);

/**
 * Cosine similarity of two vectors of length `len`.
 *
 * # Safety
 * `u` and `v` must point to `len` readable doubles and `out` must be writable.
 */
enum ZeshotStatus zeshot_cosine_similarity(const double *u,
                                           const double *v,
                                           size_t len,
                                           double *out);

/**
 * Append `count` candidate answers to `question` the way constrained prompts
 * are built. With `count == 0` the question is returned unchanged.
 *
 * # Safety
 * `question` must be a NUL-terminated string, `answers` must point to `count`
 * NUL-terminated strings (or be NULL when `count == 0`), `out` must be writable.
 */
enum ZeshotStatus zeshot_modify_prompt(const char *question,
                                       const char *const *answers,
                                       size_t count,
                                       char **out);

/**
 * Deterministic mock embedding of `text`. `out` must hold `len` doubles and
 * `len` must equal the mock dimension (64).
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` must point to `len` writable doubles.
 */
enum ZeshotStatus zeshot_mock_embed(const char *text, double *out, size_t len);

/**
 * Create a pipeline backed by remote generator and embedder services.
 * `bank_path` may be NULL for the bundled reference bank; `timeout_ms == 0`
 * keeps the default timeout; `cache_capacity == 0` disables the embedding cache.
 *
 * # Safety
 * String arguments must be NUL-terminated (or NULL where allowed); `out` must be writable.
 */
enum ZeshotStatus zeshot_pipeline_new_http(const char *bank_path,
                                           const char *generator_url,
                                           const char *embedder_url,
                                           uint64_t timeout_ms,
                                           size_t cache_capacity,
                                           struct ZeshotPipeline **out);

/**
 * Create a pipeline backed by the in-process mocks. `mock_config_json` may be
 * NULL for a generator that always answers "unknown".
 *
 * # Safety
 * String arguments must be NUL-terminated or NULL; `out` must be writable.
 */
enum ZeshotStatus zeshot_pipeline_new_mock(const char *bank_path,
                                           const char *mock_config_json,
                                           size_t cache_capacity,
                                           struct ZeshotPipeline **out);

/**
 * Answer `question` about `image` (a path or http(s) URL). On success `out_json`
 * receives the answer record as JSON.
 *
 * # Safety
 * `pipeline` must come from a constructor above; strings must be NUL-terminated.
 */
enum ZeshotStatus zeshot_pipeline_answer(const struct ZeshotPipeline *pipeline,
                                         const char *image,
                                         const char *question,
                                         char **out_json);

/**
 * Evaluate the dataset document at `dataset_path` and render the report in
 * `format` ("json", "table-text" or "csv").
 *
 * # Safety
 * `pipeline` must come from a constructor above; strings must be NUL-terminated.
 */
enum ZeshotStatus zeshot_pipeline_evaluate(const struct ZeshotPipeline *pipeline,
                                           const char *dataset_path,
                                           const char *format,
                                           size_t parallelism,
                                           char **out_report);

/**
 * Release a pipeline. NULL is ignored.
 *
 * # Safety
 * `pipeline` must be NULL or a handle from this library that has not been freed.
 */
void zeshot_pipeline_free(struct ZeshotPipeline *pipeline);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ZESHOT_H */
