/* C ABI for the quadls local-search clustering library. */

#pragma once

/* Generated with cbindgen:0.27.0 */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Rounding-resolution preset for the swap DP inside the driver.
typedef enum QuadlsProfile {
  // Engineering defaults: coarse ladders and small grids.
  QUADLS_PROFILE_DESK = 0,
  // Resolution constants taken literally from the approximation
  // analysis; only usable on tiny instances.
  QUADLS_PROFILE_PAPER_FAITHFUL = 1,
} QuadlsProfile;

// Outcome of a quadls call. Anything but `OK` leaves out-parameters
// untouched; details are available from `quadls_last_error`.
typedef enum QuadlsStatus {
  // The call succeeded.
  QUADLS_STATUS_OK = 0,
  // A required pointer argument was null.
  QUADLS_STATUS_NULL_ARGUMENT = 1,
  // Arguments failed validation (dimensions, k, epsilon, indices, ...).
  QUADLS_STATUS_INVALID_ARGUMENT = 2,
  // Text input could not be parsed.
  QUADLS_STATUS_PARSE_ERROR = 3,
  // An enumeration budget was exhausted before the call could finish.
  QUADLS_STATUS_BUDGET_EXHAUSTED = 4,
  // A panic was caught at the boundary; this is a bug in the library.
  QUADLS_STATUS_INTERNAL = 5,
} QuadlsStatus;

// An immutable clustering instance (opaque).
typedef struct QuadlsInstance QuadlsInstance;

// A solution: open centers with cached costs (opaque).
typedef struct QuadlsSolution QuadlsSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static nul-terminated string.
const char *quadls_version(void);

// Message of the most recent failure on the calling thread, or null if no
// call has failed yet. The pointer stays valid until the next failing
// quadls call on the same thread.
const char *quadls_last_error(void);

// Static name of a status code (e.g. "ok", "budget-exhausted").
const char *quadls_status_name(enum QuadlsStatus status);

// Build an instance from flat coordinate arrays.
//
// `clients` holds `n_clients * dim` coordinates (point-major), `candidates`
// holds `n_candidates * dim`, and `weights` holds `n_candidates` opening
// weights or may be null for an unweighted instance. `exponent_p` is the
// distance exponent of the objective (2 = squared Euclidean). On success
// `*out` owns the new instance; release it with `quadls_instance_free`.
//
// # Safety
//
// `clients`, `candidates`, and `out` must be valid non-null pointers with
// the lengths implied above; `weights` must be null or hold `n_candidates`
// values. The arrays are only read during the call.
enum QuadlsStatus quadls_instance_new(size_t dim,
                                      const int64_t *clients,
                                      size_t n_clients,
                                      const int64_t *candidates,
                                      const double *weights,
                                      size_t n_candidates,
                                      size_t k,
                                      double epsilon,
                                      uint32_t exponent_p,
                                      struct QuadlsInstance **out);

// Parse the line-oriented instance text format.
//
// On success `*out` owns the new instance; release it with
// `quadls_instance_free`.
//
// # Safety
//
// `text` must be a valid nul-terminated string and `out` a valid non-null
// pointer.
enum QuadlsStatus quadls_instance_parse(const char *text, struct QuadlsInstance **out);

// Serialize an instance to the text format as a heap string.
//
// Release the returned string with `quadls_string_free`. Returns null only
// if `inst` is null.
//
// # Safety
//
// `inst` must be a pointer returned by a quadls constructor (or null).
char *quadls_instance_write(const struct QuadlsInstance *inst);

// Release a string returned by `quadls_instance_write`.
//
// # Safety
//
// `s` must be a pointer previously returned by `quadls_instance_write`
// (or null), and must not be used afterwards.
void quadls_string_free(char *s);

// Release an instance handle.
//
// # Safety
//
// `inst` must be a pointer returned by a quadls constructor (or null), and
// must not be used afterwards.
void quadls_instance_free(struct QuadlsInstance *inst);

// Number of clients, or 0 if `inst` is null.
//
// # Safety
//
// `inst` must be a pointer returned by a quadls constructor (or null).
size_t quadls_instance_n_clients(const struct QuadlsInstance *inst);

// Number of candidate centers, or 0 if `inst` is null.
//
// # Safety
//
// `inst` must be a pointer returned by a quadls constructor (or null).
size_t quadls_instance_n_candidates(const struct QuadlsInstance *inst);

// The instance's k (number of centers to open), or 0 if `inst` is null.
//
// # Safety
//
// `inst` must be a pointer returned by a quadls constructor (or null).
size_t quadls_instance_k(const struct QuadlsInstance *inst);

// The instance's dimension, or 0 if `inst` is null.
//
// # Safety
//
// `inst` must be a pointer returned by a quadls constructor (or null).
size_t quadls_instance_dim(const struct QuadlsInstance *inst);

// Run the full local-search scheme.
//
// `gamma <= 0` and `retries == 0` select the documented defaults. On
// success `*out` owns the solution; release it with
// `quadls_solution_free`.
//
// # Safety
//
// `inst` must be a live instance handle and `out` a valid non-null
// pointer.
enum QuadlsStatus quadls_run_driver(const struct QuadlsInstance *inst,
                                    uint64_t seed,
                                    size_t delta,
                                    double gamma,
                                    size_t retries,
                                    enum QuadlsProfile profile,
                                    struct QuadlsSolution **out);

// D²-sampling baseline: best of `trials` independent seedings.
//
// On success `*out` owns the solution; release it with
// `quadls_solution_free`.
//
// # Safety
//
// `inst` must be a live instance handle and `out` a valid non-null
// pointer.
enum QuadlsStatus quadls_dsquared(const struct QuadlsInstance *inst,
                                  uint64_t seed,
                                  size_t trials,
                                  struct QuadlsSolution **out);

// Exact optimum by bounded enumeration over at most `max_solutions` open
// sets; fails with `BUDGET_EXHAUSTED` when the instance needs more.
//
// On success `*out` owns the solution; release it with
// `quadls_solution_free`.
//
// # Safety
//
// `inst` must be a live instance handle and `out` a valid non-null
// pointer.
enum QuadlsStatus quadls_exact_opt(const struct QuadlsInstance *inst,
                                   uint64_t max_solutions,
                                   struct QuadlsSolution **out);

// Evaluate the exact cost of opening the given candidate indices.
//
// On success `*out` owns the solution; release it with
// `quadls_solution_free`.
//
// # Safety
//
// `inst` must be a live instance handle, `open` must point to `len`
// indices, and `out` must be a valid non-null pointer.
enum QuadlsStatus quadls_eval(const struct QuadlsInstance *inst,
                              const size_t *open,
                              size_t len,
                              struct QuadlsSolution **out);

// Total cost (service plus opening), or NaN if `sol` is null.
//
// # Safety
//
// `sol` must be a pointer returned by a quadls call (or null).
double quadls_solution_total(const struct QuadlsSolution *sol);

// Service cost alone, or NaN if `sol` is null.
//
// # Safety
//
// `sol` must be a pointer returned by a quadls call (or null).
double quadls_solution_service_cost(const struct QuadlsSolution *sol);

// Opening cost alone, or NaN if `sol` is null.
//
// # Safety
//
// `sol` must be a pointer returned by a quadls call (or null).
double quadls_solution_opening_cost(const struct QuadlsSolution *sol);

// Number of open centers, or 0 if `sol` is null.
//
// # Safety
//
// `sol` must be a pointer returned by a quadls call (or null).
size_t quadls_solution_len(const struct QuadlsSolution *sol);

// Copy up to `cap` open candidate indices into `buf`; returns the number
// of open centers regardless (call with `cap = 0` to size the buffer).
//
// # Safety
//
// `sol` must be a pointer returned by a quadls call (or null); `buf` must
// point to at least `cap` writable entries unless `cap` is 0.
size_t quadls_solution_centers(const struct QuadlsSolution *sol, size_t *buf, size_t cap);

// Release a solution handle.
//
// # Safety
//
// `sol` must be a pointer returned by a quadls call (or null), and must
// not be used afterwards.
void quadls_solution_free(struct QuadlsSolution *sol);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
