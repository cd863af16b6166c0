/* C interface to the differential count-rate scanner. */

#ifndef RATESCAN_H
#define RATESCAN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of a fallible call.
typedef enum RatescanStatus {
  RATESCAN_STATUS_OK = 0,
  // A required pointer argument was null.
  RATESCAN_STATUS_NULL_POINTER = 1,
  // An argument was outside its admissible domain.
  RATESCAN_STATUS_INVALID_ARGUMENT = 2,
  // A track file was malformed.
  RATESCAN_STATUS_PARSE_ERROR = 3,
  // The problem exceeds a hard size limit.
  RATESCAN_STATUS_TOO_LARGE = 4,
  // The operating system reported a failure.
  RATESCAN_STATUS_IO_ERROR = 5,
  // An internal invariant failed; please report a bug.
  RATESCAN_STATUS_INTERNAL_ERROR = 6,
} RatescanStatus;

// Result of a scan (opaque): per-position posterior probabilities of
// differential rates, the flagged subset, and work statistics.
typedef struct RatescanResult RatescanResult;

// Two-group count track over ordered positions (opaque).
typedef struct RatescanTrack RatescanTrack;

// Scan configuration.
//
// `alpha` and `beta` are the shape and rate of the Gamma prior on cluster
// rates; leave either at zero (or negative) to fit both from the track's
// pooled counts. `diff_prob` is the prior probability that a position is
// differential, `threshold` the posterior probability above which positions
// are flagged and below which intervals may be pruned, `dp_precision` the
// Dirichlet-process concentration. `max_depth` of zero tests every position
// in a single chain; a positive depth scans a binary interval tree of that
// height, pruning intervals whose aggregate evidence is compatible with no
// differential position.
typedef struct RatescanOptions {
  double alpha;
  double beta;
  double dp_precision;
  double diff_prob;
  double threshold;
  uint64_t sweeps;
  uint64_t burnin;
  uint64_t seed;
  uint32_t max_depth;
} RatescanOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread. Never null;
// empty before the first failure. Valid until the next failing call on the
// same thread.
const char *ratescan_last_error_message(void);

// Library version as a static string.
const char *ratescan_version(void);

// Build a track with unit exposures from parallel arrays of length `len`.
// Positions must be strictly increasing.
//
// # Safety
// The three input pointers must address `len` readable elements each and
// `out` must be a valid location to store the new handle.
enum RatescanStatus ratescan_track_new(const int64_t *positions,
                                       const uint64_t *counts1,
                                       const uint64_t *counts2,
                                       uintptr_t len,
                                       struct RatescanTrack **out);

// Like [`ratescan_track_new`] with per-position, per-group exposures, which
// must be positive and finite.
//
// # Safety
// All five input pointers must address `len` readable elements each and
// `out` must be a valid location to store the new handle.
enum RatescanStatus ratescan_track_new_with_exposures(const int64_t *positions,
                                                      const uint64_t *counts1,
                                                      const uint64_t *counts2,
                                                      const double *exposures1,
                                                      const double *exposures2,
                                                      uintptr_t len,
                                                      struct RatescanTrack **out);

// Read a track from a CSV file with header
// `position,count1,count2[,exposure1,exposure2]`.
//
// # Safety
// `path` must be a valid NUL-terminated string and `out` a valid location
// to store the new handle.
enum RatescanStatus ratescan_track_from_csv(const char *path, struct RatescanTrack **out);

// Number of positions, or 0 for a null handle.
//
// # Safety
// `track` must be null or a live handle from a `ratescan_track_*` call.
uintptr_t ratescan_track_len(const struct RatescanTrack *track);

// Release a track handle. Null is ignored.
//
// # Safety
// `track` must be null or an owned handle not freed before.
void ratescan_track_free(struct RatescanTrack *track);

// Default options: hyperparameters fitted from the data, uninformative 0.5
// prior and threshold, 10k sweeps with 2k burn-in, depth-10 tree.
struct RatescanOptions ratescan_options_default(void);

// Scan a track for regions of differential rates. Identical inputs (track,
// options, seed) produce identical results.
//
// # Safety
// `track` must be a live track handle, `options` a readable options struct,
// and `out` a valid location to store the new result handle.
enum RatescanStatus ratescan_scan(const struct RatescanTrack *track,
                                  const struct RatescanOptions *options,
                                  struct RatescanResult **out);

// Number of scored positions (the track length), or 0 for a null handle.
//
// # Safety
// `result` must be null or a live result handle.
uintptr_t ratescan_result_len(const struct RatescanResult *result);

// Number of positions whose posterior exceeded the threshold.
//
// # Safety
// `result` must be null or a live result handle.
uintptr_t ratescan_result_flagged_len(const struct RatescanResult *result);

// Chains run during the scan (pruning makes this far smaller than a
// position-by-position pass on long tracks).
//
// # Safety
// `result` must be null or a live result handle.
uintptr_t ratescan_result_invocations(const struct RatescanResult *result);

// Copy positions and their posterior probabilities, ordered by position,
// into caller buffers of exactly [`ratescan_result_len`] elements. Either
// buffer may be null to skip that column.
//
// # Safety
// `result` must be a live result handle; non-null buffers must hold `len`
// writable elements.
enum RatescanStatus ratescan_result_omegas(const struct RatescanResult *result,
                                           int64_t *positions,
                                           double *omegas,
                                           uintptr_t len);

// Copy the flagged positions and their posteriors, ordered by position,
// into caller buffers of exactly [`ratescan_result_flagged_len`] elements.
// Either buffer may be null to skip that column.
//
// # Safety
// `result` must be a live result handle; non-null buffers must hold `len`
// writable elements.
enum RatescanStatus ratescan_result_flagged(const struct RatescanResult *result,
                                            int64_t *positions,
                                            double *omegas,
                                            uintptr_t len);

// Release a result handle. Null is ignored.
//
// # Safety
// `result` must be null or an owned handle not freed before.
void ratescan_result_free(struct RatescanResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RATESCAN_H */
