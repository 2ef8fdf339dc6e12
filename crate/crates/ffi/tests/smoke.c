#include <math.h>
#include <stdio.h>
#include "adaftrl.h"

/* OGD on the unit ball; the iterate is -0.5 * sum(g) projected. */
int main(void) {
    AdaftrlLearner *h = NULL;
    AdaftrlStatus st = adaftrl_learner_new("{\"preset\":\"ogd\",\"eta\":0.5}",
                                           "{\"kind\":\"ball\",\"center\":[0,0],\"radius\":1}", 0, &h);
    if (st != ADAFTRL_STATUS_OK) {
        fprintf(stderr, "new: %s: %s\n", adaftrl_status_name(st), adaftrl_last_error());
        return 1;
    }
    double g[2] = {1.0, 0.0};
    double x[2];
    for (int t = 0; t < 3; t++) {
        if (adaftrl_learner_step(h, g, 2) != ADAFTRL_STATUS_OK) return 2;
    }
    if (adaftrl_learner_x(h, x, 2) != ADAFTRL_STATUS_OK) return 3;
    if (fabs(x[0] + 1.0) > 1e-12 || fabs(x[1]) > 1e-12) return 4;
    if (adaftrl_learner_step(h, g, 3) != ADAFTRL_STATUS_DIMENSION_MISMATCH) return 5;
    if (adaftrl_last_error() == NULL) return 6;
    adaftrl_learner_free(h);
    printf("ok %s\n", adaftrl_version());
    return 0;
}
