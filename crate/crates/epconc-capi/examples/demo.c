/* Minimal C consumer: run trials at the balanced point and print the
 * per-weight yield rows.
 *
 * Build (from the workspace root, after `cargo build --release`):
 *   cc crates/epconc-capi/examples/demo.c \
 *      -Icrates/epconc-capi/include \
 *      -Ltarget/release -lepconc_capi -lpthread -lm -ldl -o demo
 */
#include <stdio.h>
#include "epconc.h"

int main(void) {
    printf("epconc %s\n", epconc_version());

    EpconcProtocolResult one;
    if (epconc_run_protocol(0.70710678118654752, 3, 7, EPCONC_ENGINE_MIRRORED, &one) != EPCONC_OK) {
        fprintf(stderr, "single run failed\n");
        return 1;
    }
    printf("single run: weight=%u pairs=%u fidelity=%.12f\n", one.weight, one.pairs, one.fidelity);

    EpconcYieldTable *table = NULL;
    if (epconc_run_trials(0.70710678118654752, 3, 20000, 7, EPCONC_ENGINE_MIRRORED, &table) != EPCONC_OK) {
        fprintf(stderr, "trials failed\n");
        return 1;
    }
    size_t rows = epconc_yield_table_rows(table);
    for (size_t i = 0; i < rows; i++) {
        EpconcYieldRow row;
        epconc_yield_table_row(table, i, &row);
        printf("j=%u P=%.6f k=%u E[pairs|j]=%.6f empirical=%.6f trials=%llu\n",
               row.weight, row.probability, row.bit_length, row.expected_pairs,
               row.empirical_mean, (unsigned long long)row.trials);
    }
    EpconcYieldTotals totals;
    epconc_yield_table_totals(table, &totals);
    printf("expected %.6f empirical %.6f ceiling %.6f\n",
           totals.expected_pairs, totals.empirical_mean, totals.entropy_ceiling);
    epconc_yield_table_free(table);
    return 0;
}
