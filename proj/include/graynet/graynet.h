/* graynet C API: multiparty privacy-learning simulator for anomaly traffic
 * identification. All state lives behind opaque handles; every function
 * returns a gn_status code and leaves a human-readable message in
 * gn_last_error() on failure. */

#ifndef GRAYNET_GRAYNET_H
#define GRAYNET_GRAYNET_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gn_status {
    GN_OK = 0,
    GN_E_USAGE = 1,    /* bad arguments: unknown axis, invalid spec values */
    GN_E_IO = 2,       /* missing or unwritable files */
    GN_E_PARSE = 3,    /* malformed config, flow, capture or parameter data */
    GN_E_DATA = 4,     /* semantically invalid data (missing class, ...) */
    GN_E_INTERNAL = 5
} gn_status;

/* Message describing the most recent failure on this thread. */
const char* gn_last_error(void);

const char* gn_version(void);

/* ---- experiment configuration ---------------------------------------- */

typedef struct gn_config gn_config;

gn_status gn_config_load(const char* path, gn_config** out);
gn_status gn_config_parse(const char* json_text, gn_config** out);
/* Re-seeds synthesis, training and client selection from one base value. */
gn_status gn_config_override_seed(gn_config* config, unsigned long long seed);
/* Serialized form with every default filled in; free with gn_string_free. */
gn_status gn_config_dump(const gn_config* config, char** out);
void gn_config_free(gn_config* config);

/* ---- workflows -------------------------------------------------------- */

/* Writes d_g.jsonl, d_ps_client<i>.jsonl, d_a.jsonl, d_r.jsonl and
 * graph.json into out_dir. */
gn_status gn_generate(const gn_config* config, const char* out_dir);

/* Runs the federation once; writes params.bin and rounds.jsonl into
 * out_dir and stores the generalization error in *e_star. */
gn_status gn_train(const gn_config* config, const char* out_dir, double* e_star);

/* Cross-validated sweep over one hyperparameter axis ("embed_dim",
 * "extract_depth" or "support_size"); writes sweep_<axis>.csv,
 * sweep_<axis>.md, per-fold round logs and a wall-clock report. */
gn_status gn_sweep(const gn_config* config, const char* axis, const char* out_dir);

/* Scores a prediction stream (one record per line: flow_id, predicted,
 * actual) with the balance coefficient xi. */
gn_status gn_eval_file(const char* predictions_path, double xi, double* g_error);

/* ---- capture inspection ------------------------------------------------ */

typedef struct gn_capture gn_capture;

typedef struct gn_packet_info {
    double timestamp;
    unsigned long captured_len;
    unsigned long original_len;
} gn_packet_info;

gn_status gn_capture_open(const char* path, gn_capture** out);
unsigned long gn_capture_packet_count(const gn_capture* capture);
/* 0 = big endian file, 1 = little endian file. */
int gn_capture_byte_order(const gn_capture* capture);
gn_status gn_capture_packet(const gn_capture* capture, unsigned long index,
                            gn_packet_info* info);
void gn_capture_free(gn_capture* capture);

void gn_string_free(char* text);

#ifdef __cplusplus
}
#endif

#endif /* GRAYNET_GRAYNET_H */
