/* Smoke test: exercise the C API end to end. Compiled and run by the
 * accompanying Rust integration test. */
#include "klab.h"
#include <math.h>
#include <stdio.h>
#include <string.h>

static double square(double x, void *user) {
    (void)user;
    return x * x;
}

int main(void) {
    double value = 0.0;
    if (klab_log_sobolev_constant(2.0, 1.0, -1.0, &value) != KLAB_STATUS_OK) {
        fprintf(stderr, "entropy constant failed\n");
        return 1;
    }
    if (fabs(value - 2.0) > 1e-12) {
        fprintf(stderr, "entropy constant wrong: %f\n", value);
        return 1;
    }

    /* Domain errors surface as status codes with a message. */
    if (klab_log_sobolev_constant(2.0, 1.0, 1.0, &value) != KLAB_STATUS_DOMAIN) {
        fprintf(stderr, "expected a domain error\n");
        return 1;
    }
    if (klab_last_error_message()[0] == '\0') {
        fprintf(stderr, "expected an error message\n");
        return 1;
    }

    KlabOu *ou = NULL;
    if (klab_ou_new(1.0, 0.0, 0.0, 1.0, &ou) != KLAB_STATUS_OK) {
        fprintf(stderr, "handle construction failed\n");
        return 1;
    }
    if (klab_ou_evolve(ou, square, NULL, 0.0, 1.0, 1.0, &value) != KLAB_STATUS_OK) {
        fprintf(stderr, "evolve failed\n");
        return 1;
    }
    double expected = exp(-2.0) + (1.0 - exp(-2.0));
    if (fabs(value - expected) > 1e-12) {
        fprintf(stderr, "evolve wrong: %f vs %f\n", value, expected);
        return 1;
    }
    klab_ou_free(ou);

    char *verdict = NULL;
    if (klab_feller_classify_json("{\"q\": 1.0, \"b\": {\"kind\": \"cubic\"}}", &verdict) !=
        KLAB_STATUS_OK) {
        fprintf(stderr, "classification failed\n");
        return 1;
    }
    int unique = strstr(verdict, "unique_bounded_solution") != NULL;
    klab_string_free(verdict);
    if (!unique) {
        fprintf(stderr, "expected a uniqueness verdict\n");
        return 1;
    }
    printf("c smoke ok (version %s)\n", klab_version());
    return 0;
}
