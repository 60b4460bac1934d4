#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "regunet.h"

#define CHECK(call)                                                          \
    do {                                                                     \
        RgStatus st_ = (call);                                               \
        if (st_ != RG_STATUS_OK) {                                           \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)st_,               \
                    rg_last_error_message());                                \
            return 1;                                                        \
        }                                                                    \
    } while (0)

int main(int argc, char **argv) {
    if (argc != 3) {
        fprintf(stderr, "usage: smoke <config> <out_dir>\n");
        return 2;
    }
    RgDataset *ds = NULL;
    RgSample *s = NULL;
    size_t count = 0, nodes = 0, steps = 0;

    CHECK(rg_dataset_generate(argv[1], argv[2], 3, 1, &ds));
    CHECK(rg_dataset_count(ds, RG_SPLIT_TRAIN, &count));
    CHECK(rg_dataset_sample(ds, RG_SPLIT_TRAIN, 0, &s));
    CHECK(rg_sample_shape(s, &nodes, &steps));

    double *pos = malloc(sizeof(double) * nodes * steps * 3);
    if (rg_sample_positions(s, pos, 1) != RG_STATUS_BUFFER_TOO_SMALL) return 1;
    if (strlen(rg_last_error_message()) == 0) return 1;
    CHECK(rg_sample_positions(s, pos, nodes * steps * 3));
    if (rg_dataset_count(NULL, 0, &count) != RG_STATUS_NULL_ARGUMENT) return 1;

    printf("version %s count %zu nodes %zu steps %zu z0 %.17g\n", rg_version(), count, nodes, steps,
           pos[2]);
    free(pos);
    rg_sample_free(s);
    rg_dataset_free(ds);
    return 0;
}
