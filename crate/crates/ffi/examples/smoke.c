/* Build: cc examples/smoke.c -Iinclude -L../../target/release -l:libturnpike_ffi.a -lm -lpthread -ldl */
#include <stdio.h>
#include "turnpike.h"

int main(void) {
    TpMarket *market = NULL;
    TpDual *terminal = NULL, *consumption = NULL;
    TpProblem *problem = NULL;
    if (tp_market_new(0.02, 0.2, 0.2, 0.03, &market) != TP_STATUS_OK ||
        tp_dual_parse("power:q=-0.5", &terminal) != TP_STATUS_OK ||
        tp_dual_parse("power:q=-2", &consumption) != TP_STATUS_OK ||
        tp_problem_new(terminal, consumption, market, &problem) != TP_STATUS_OK) {
        fprintf(stderr, "setup failed: %s\n", tp_last_error());
        return 1;
    }
    for (double t = 1; t <= 100; t *= 10) {
        TpStrategyPoint p;
        if (tp_optimal_strategy(problem, 10.0, t, TP_METHOD_AUTO, &p) != TP_STATUS_OK) {
            fprintf(stderr, "%s\n", tp_last_error());
            return 1;
        }
        printf("t=%g pi=%.4f c=%.4f\n", t, p.fraction, p.consumption);
    }
    tp_problem_free(problem);
    tp_dual_free(terminal);
    tp_dual_free(consumption);
    tp_market_free(market);
    return 0;
}
