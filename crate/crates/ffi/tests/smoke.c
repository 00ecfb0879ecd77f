#include <stdio.h>
#include "qan.h"

int main(int argc, char **argv) {
    if (argc < 2) return 2;
    QanScenario *s = NULL;
    if (qan_scenario_load(argv[1], &s) != QAN_STATUS_OK) {
        fprintf(stderr, "load: %s\n", qan_last_error());
        return 1;
    }
    QanPlanSummary sum;
    if (qan_plan(s, &sum) != QAN_STATUS_OK) {
        fprintf(stderr, "plan: %s\n", qan_last_error());
        return 1;
    }
    printf("qan %s loss=%.3f rate=%.1f feasible=%d\n", qan_version(), sum.link_loss_db, sum.r_bps, sum.feasible);
    QanStatus st = qan_scenario_set_number(s, "/scheme/classical_split", 48.0);
    printf("bad split -> %d (%s)\n", (int)st, qan_last_error());
    char *json = NULL;
    if (qan_plan_json(s, &json) != QAN_STATUS_OK) return 1;
    qan_string_free(json);
    qan_scenario_free(s);
    return 0;
}
