#ifndef EPCONC_H
#define EPCONC_H

/* Generated by cbindgen from epconc-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call in this interface.
 */
typedef enum EpconcStatus {
  /**
   * The call succeeded and any out-parameters are valid.
   */
  EPCONC_OK = 0,
  /**
   * A parameter was out of range or inconsistent.
   */
  EPCONC_INVALID_ARGUMENT = 1,
  /**
   * The requested size exceeds an engine limit.
   */
  EPCONC_LIMIT_EXCEEDED = 2,
  /**
   * A required pointer was NULL.
   */
  EPCONC_NULL_POINTER = 3,
  /**
   * An internal invariant failed; not expected in normal use.
   */
  EPCONC_INTERNAL_ERROR = 4,
} EpconcStatus;

/**
 * Simulation backend selector.
 */
typedef enum EpconcEngine {
  /**
   * Compressed matched-pair engine; handles up to 20 shared pairs.
   */
  EPCONC_ENGINE_MIRRORED = 0,
  /**
   * Literal two-party engine; handles up to 6 shared pairs.
   */
  EPCONC_ENGINE_FULL = 1,
} EpconcEngine;

/**
 * Network selector for netlist export.
 */
typedef enum EpconcNetwork {
  EPCONC_NETWORK_HAMMING = 0,
  EPCONC_NETWORK_PERM = 1,
  EPCONC_NETWORK_CASCADE = 2,
} EpconcNetwork;

/**
 * Direction selector for the ranking network.
 */
typedef enum EpconcDirection {
  EPCONC_DIRECTION_INVERSE = 0,
  EPCONC_DIRECTION_FORWARD = 1,
} EpconcDirection;

/**
 * Opaque aggregated trial statistics; release with
 * [`epconc_yield_table_free`].
 */
typedef struct EpconcYieldTable EpconcYieldTable;

/**
 * Observables of one protocol run.
 */
typedef struct EpconcProtocolResult {
  /**
   * Measured Hamming weight j.
   */
  uint32_t weight;
  /**
   * Bit length k of C(n,j).
   */
  uint32_t bit_length;
  /**
   * Cascade stop iteration l.
   */
  uint32_t stop_index;
  /**
   * Number of clean pairs distilled, k - l - 1.
   */
  uint32_t pairs;
  /**
   * Fidelity of the retained state against the ideal reference.
   */
  double fidelity;
} EpconcProtocolResult;

/**
 * One per-weight row of a yield table.
 */
typedef struct EpconcYieldRow {
  uint32_t weight;
  double probability;
  uint32_t bit_length;
  double expected_pairs;
  double lower_bound;
  /**
   * NaN when no trial measured this weight.
   */
  double empirical_mean;
  uint64_t trials;
} EpconcYieldRow;

/**
 * Aggregates of a yield table.
 */
typedef struct EpconcYieldTotals {
  double expected_pairs;
  double empirical_mean;
  double empirical_variance;
  double entropy_ceiling;
  double expected_entropy;
  double lower_bound;
  double lower_bound_clamped;
  uint64_t trials;
} EpconcYieldTotals;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string; do not free.
 */
const char *epconc_version(void);

/**
 * Run the protocol once with the given seed.
 *
 * # Safety
 * `out` must point to writable memory for one `EpconcProtocolResult`.
 */
enum EpconcStatus epconc_run_protocol(double alpha,
                                      uint32_t n,
                                      uint64_t seed,
                                      enum EpconcEngine engine,
                                      struct EpconcProtocolResult *out);

/**
 * Run independent seeded trials and hand back the aggregated table.
 *
 * # Safety
 * `out` must point to writable memory for one pointer. On success it
 * receives a handle that must be released with
 * [`epconc_yield_table_free`].
 */
enum EpconcStatus epconc_run_trials(double alpha,
                                    uint32_t n,
                                    uint64_t trials,
                                    uint64_t seed,
                                    enum EpconcEngine engine,
                                    struct EpconcYieldTable **out);

/**
 * Release a yield table handle. NULL is ignored.
 *
 * # Safety
 * `table` must have come from [`epconc_run_trials`] and not have been
 * freed already.
 */
void epconc_yield_table_free(struct EpconcYieldTable *table);

/**
 * Number of rows (one per weight 0..=n) in the table.
 *
 * # Safety
 * `table` must be a live handle from [`epconc_run_trials`].
 */
size_t epconc_yield_table_rows(const struct EpconcYieldTable *table);

/**
 * Copy out one row.
 *
 * # Safety
 * `table` must be a live handle and `out` writable for one row.
 */
enum EpconcStatus epconc_yield_table_row(const struct EpconcYieldTable *table,
                                         size_t index,
                                         struct EpconcYieldRow *out);

/**
 * Copy out the aggregate statistics.
 *
 * # Safety
 * `table` must be a live handle and `out` writable for one totals
 * struct.
 */
enum EpconcStatus epconc_yield_table_totals(const struct EpconcYieldTable *table,
                                            struct EpconcYieldTotals *out);

/**
 * Render the table in its fixed-column CSV form.
 *
 * # Safety
 * `table` must be a live handle and `out` writable for one pointer.
 * The returned string must be released with [`epconc_string_free`].
 */
enum EpconcStatus epconc_yield_table_csv(const struct EpconcYieldTable *table, char **out);

/**
 * Release a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must have come from this library and not have been freed
 * already.
 */
void epconc_string_free(char *s);

/**
 * Binary entropy H(p) in bits.
 *
 * # Safety
 * `out` must be writable for one double.
 */
enum EpconcStatus epconc_binary_entropy(double p, double *out);

/**
 * Analytic expected number of clean pairs per run.
 *
 * # Safety
 * `out` must be writable for one double.
 */
enum EpconcStatus epconc_expected_pairs(double alpha, uint32_t n, double *out);

/**
 * Expected concentrated entropy of entanglement for (alpha, n).
 *
 * # Safety
 * `out` must be writable for one double.
 */
enum EpconcStatus epconc_expected_concentrated_entropy(double alpha, uint32_t n, double *out);

/**
 * Render one of the reversible networks as a text netlist.
 *
 * `j` is ignored for the Hamming network; `direction` only matters for
 * the ranking network.
 *
 * # Safety
 * `out` must be writable for one pointer. The returned string must be
 * released with [`epconc_string_free`].
 */
enum EpconcStatus epconc_netlist(enum EpconcNetwork network,
                                 uint32_t n,
                                 uint32_t j,
                                 enum EpconcDirection direction,
                                 char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EPCONC_H */
