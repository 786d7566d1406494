#include <math.h>
#include <stdio.h>
#include <string.h>

#include "perceptron_lab.h"

#define CHECK(cond)                                              \
  do {                                                           \
    if (!(cond)) {                                               \
      fprintf(stderr, "check failed line %d: %s\n", __LINE__, #cond); \
      return 1;                                                  \
    }                                                            \
  } while (0)

int main(void) {
  CHECK(strlen(pl_version()) > 0);
  CHECK(fabs(pl_log_gauss_tail(0.0) + log(2.0)) < 1e-15);

  PlQuadSpec *spec = pl_quad_spec_default();
  double gd = 0.0;
  CHECK(pl_gd_at(spec, 0.847, 0.5, &gd) == PL_STATUS_OK);
  CHECK(fabs(gd + 0.847 - 0.5 * (1.0 - log(2.0))) < 1e-9);
  CHECK(pl_gd_at(spec, 0.847, 1.5, &gd) == PL_STATUS_DOMAIN);
  CHECK(pl_last_error_message() != NULL);

  PlBoundCertificate cert;
  CHECK(pl_conditional_rate(spec, 0.847, 1e-4, &cert) == PL_STATUS_OK);
  CHECK(cert.bound_holds);

  PlInstance *inst = NULL;
  CHECK(pl_instance_sample(10, 5, 3, &inst) == PL_STATUS_OK);
  uint64_t counts[6];
  size_t written = 0;
  CHECK(pl_instance_count_solutions(inst, counts, 6, &written) == PL_STATUS_OK);
  CHECK(written == 6 && counts[0] == 1024 && counts[1] == 512);

  PlSphericalEstimate est;
  CHECK(pl_instance_estimate_f_direct(inst, 10000, 1, &est) == PL_STATUS_OK);
  CHECK(est.f_hat <= 0.0 && est.method == PL_ESTIMATOR_METHOD_DIRECT_GAUSSIAN);

  pl_instance_free(inst);
  pl_quad_spec_free(spec);
  printf("ok\n");
  return 0;
}
