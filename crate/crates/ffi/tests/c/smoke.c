#include <math.h>
#include <stdio.h>
#include <string.h>

#include "qthermo.h"

#define CHECK(call)                                                          \
    do {                                                                     \
        QtStatus s_ = (call);                                                \
        if (s_ != QT_STATUS_OK) {                                            \
            fprintf(stderr, "%s failed (%d): %s\n", #call, s_, qt_last_error()); \
            return 1;                                                        \
        }                                                                    \
    } while (0)

int main(void) {
    double h[18] = {0};
    h[2 * 4] = 1.0;
    h[2 * 8] = 2.0;
    double rho[18] = {0};
    rho[0] = 0.3;
    rho[2 * 1] = 0.1;
    rho[2 * 1 + 1] = 0.05;
    rho[2 * 3] = 0.1;
    rho[2 * 3 + 1] = -0.05;
    rho[2 * 4] = 0.5;
    rho[2 * 5] = 0.05;
    rho[2 * 7] = 0.05;
    rho[2 * 8] = 0.2;

    QtModel *model = NULL;
    QtState *start = NULL;
    QtState *gibbs = NULL;
    QtDynamics *sea = NULL;
    QtTrajectory *traj = NULL;
    CHECK(qt_model_new(3, h, 0, NULL, &model));
    CHECK(qt_state_new(3, rho, &start));
    CHECK(qt_dynamics_new(QT_DYNAMICS_KIND_SEA_SINGLE, NULL, 0, &sea));
    double beta = 0.0;
    CHECK(qt_solve_gibbs(model, 0.9, NULL, 0, &gibbs, &beta));
    CHECK(qt_propagate(model, sea, start, 50.0, 50, 0.0, 0.0, false, &traj));

    QtState *last = NULL;
    double t = 0.0;
    CHECK(qt_trajectory_sample(traj, qt_trajectory_len(traj) - 1, &t, &last));
    double dist = 1.0;
    CHECK(qt_trace_distance(last, gibbs, &dist));
    double e = 0.0;
    CHECK(qt_expectation(last, h, &e));

    int bad = qt_state_new(3, h, &start) == QT_STATUS_INVALID_INPUT && strlen(qt_last_error()) > 0;

    printf("beta %.6f t %.1f distance %.3e energy %.12f\n", beta, t, dist, e);
    qt_state_free(last);
    qt_trajectory_free(traj);
    qt_dynamics_free(sea);
    qt_state_free(gibbs);
    qt_state_free(start);
    qt_model_free(model);
    return (dist < 1e-6 && fabs(e - 0.9) < 1e-8 && bad) ? 0 : 1;
}
