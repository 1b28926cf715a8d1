#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "fedgraph.h"

static int fail(const char *what, FgStatus s) {
    fprintf(stderr, "%s: status %d: %s\n", what, (int)s, fg_last_error_message());
    return 1;
}

int main(int argc, char **argv) {
    if (argc != 2) {
        return 2;
    }
    FILE *f = fopen(argv[1], "rb");
    if (!f) {
        return 2;
    }
    fseek(f, 0, SEEK_END);
    long size = ftell(f);
    fseek(f, 0, SEEK_SET);
    char *config = calloc((size_t)size + 1, 1);
    if (fread(config, 1, (size_t)size, f) != (size_t)size) {
        return 2;
    }
    fclose(f);

    FgRun *run = NULL;
    FgStatus s = fg_run_simulate(config, NULL, &run);
    if (s != FG_STATUS_OK) {
        return fail("simulate", s);
    }
    size_t nodes = 0, dim = 0, edges = 0;
    if ((s = fg_run_shape(run, &nodes, &dim)) != FG_STATUS_OK) {
        return fail("shape", s);
    }
    float *emb = malloc(nodes * dim * sizeof(float));
    if ((s = fg_run_embedding(run, emb, nodes * dim)) != FG_STATUS_OK) {
        return fail("embedding", s);
    }
    if ((s = fg_run_edge_count(run, &edges)) != FG_STATUS_OK) {
        return fail("edge count", s);
    }
    size_t needed = 0;
    s = fg_run_node_id(run, 0, NULL, 0, &needed);
    if (s != FG_STATUS_BUFFER_TOO_SMALL || needed == 0) {
        return fail("node id size", s);
    }
    char *id = malloc(needed);
    if ((s = fg_run_node_id(run, 0, id, needed, &needed)) != FG_STATUS_OK) {
        return fail("node id", s);
    }
    s = fg_run_shape(NULL, &nodes, &dim);
    if (s != FG_STATUS_NULL_POINTER || strlen(fg_last_error_message()) == 0) {
        return fail("null handle", s);
    }
    double sum = 0.0;
    for (size_t i = 0; i < nodes * dim; i++) {
        sum += emb[i];
    }
    printf("%zu %zu %zu %s %.6f\n", nodes, dim, edges, id, sum);
    free(id);
    free(emb);
    free(config);
    fg_run_free(run);
    return 0;
}
