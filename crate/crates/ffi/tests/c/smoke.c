#include <stdio.h>
#include "diststat.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        DsStatus st_ = (call);                                             \
        if (st_ != DS_STATUS_OK) {                                         \
            fprintf(stderr, "%s: %d %s\n", #call, st_, ds_last_error());   \
            return st_;                                                    \
        }                                                                  \
    } while (0)

static DsStatus body(DsComm *comm, void *user) {
    (void)user;
    size_t rank, size;
    CHECK(ds_comm_rank(comm, &rank));
    CHECK(ds_comm_size(comm, &size));

    double x = (double)(rank + 1);
    CHECK(ds_allreduce_f64(comm, &x, 1, DS_REDUCE_OP_SUM));
    if (x != (double)(size * (size + 1) / 2)) return DS_STATUS_NUMERIC;

    /* A = [1 3 5; 2 4 6], B = A^T, C = A B = [35 44; 44 56] */
    double a[6] = {1, 2, 3, 4, 5, 6};
    size_t shape[2] = {2, 3};
    DsArray *A, *C;
    CHECK(ds_array_distribute(comm, a, shape, 2, 0, &A));
    size_t cs[2] = {2, 2};
    CHECK(ds_array_new(comm, cs, 2, &C));
    CHECK(ds_matmul(C, 0, A, 0, A, 1));
    double c[4];
    CHECK(ds_array_gather(C, c, 4));
    if (c[0] != 35 || c[1] != 44 || c[2] != 44 || c[3] != 56) return DS_STATUS_NUMERIC;

    double n1;
    CHECK(ds_opnorm(A, DS_NORM_L1, &n1));
    if (n1 != 11) return DS_STATUS_NUMERIC;

    if (ds_matmul(C, 0, A, 0, A, 0) != DS_STATUS_SHAPE) return DS_STATUS_INVALID_ARGUMENT;

    ds_array_free(C);
    ds_array_free(A);
    return DS_STATUS_OK;
}

int main(void) {
    DsStatus st = ds_inproc_run(3, body, NULL);
    if (st != DS_STATUS_OK) {
        fprintf(stderr, "failed: %d %s\n", st, ds_last_error());
        return 1;
    }
    puts("ok");
    return 0;
}
