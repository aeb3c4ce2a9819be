#ifndef NRDR_H
#define NRDR_H

/*
 * C interface to the radar rendering / decoding library.
 *
 * Every function that can fail returns an nrdr_status; on failure the
 * out-parameters are untouched and nrdr_last_error() describes what went
 * wrong (thread-local). Handles are opaque and owned by the caller; release
 * them with the matching *_free function. Strings returned through char**
 * out-parameters are heap-allocated; release them with nrdr_string_free.
 *
 * JSON-typed string parameters ("radar_json") take the same object shape as
 * the "radar" section of an experiment config; pass NULL for defaults.
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nrdr_status {
  NRDR_OK = 0,
  NRDR_ERR_CONFIG = 2,  /* invalid configuration or arguments */
  NRDR_ERR_DATA = 3,    /* malformed files or inconsistent inputs */
  NRDR_ERR_NUMERIC = 4  /* numeric failure (non-finite values, no solution) */
} nrdr_status;

const char* nrdr_version(void);
const char* nrdr_last_error(void);
void nrdr_string_free(char* s);

/* ---- scenes -------------------------------------------------------- */

typedef struct nrdr_scene nrdr_scene;

nrdr_status nrdr_scene_load(const char* path, nrdr_scene** out);
/* Built-in multi-object scene (ground plane, two boxes, one moving actor). */
nrdr_status nrdr_scene_example(uint64_t feature_seed, nrdr_scene** out);
nrdr_status nrdr_scene_save(const nrdr_scene* scene, const char* path);
/* Copy with one actor disabled; index must be in range. */
nrdr_status nrdr_scene_without_actor(const nrdr_scene* scene, size_t actor_index,
                                     nrdr_scene** out);
nrdr_status nrdr_scene_signed_distance(const nrdr_scene* scene,
                                       const double position[3], double time,
                                       double* out);
void nrdr_scene_free(nrdr_scene* scene);

/* ---- point clouds --------------------------------------------------- */

typedef struct nrdr_cloud nrdr_cloud;

/* Format from the extension: .csv, .jsonl / .ndjson. */
nrdr_status nrdr_cloud_read(const char* path, nrdr_cloud** out);
nrdr_status nrdr_cloud_write(const nrdr_cloud* cloud, const char* path);
size_t nrdr_cloud_size(const nrdr_cloud* cloud);
nrdr_status nrdr_cloud_point(const nrdr_cloud* cloud, size_t index,
                             double out_xyz[3]);
void nrdr_cloud_free(nrdr_cloud* cloud);

/* ---- radar scan files ------------------------------------------------ */

typedef struct nrdr_scan_set nrdr_scan_set;

nrdr_status nrdr_scan_set_read(const char* path, nrdr_scan_set** out);
size_t nrdr_scan_set_size(const nrdr_scan_set* scans);
/* Rows skipped because their validity flag was 0. */
size_t nrdr_scan_set_dropped(const nrdr_scan_set* scans);
nrdr_status nrdr_scan_set_cloud(const nrdr_scan_set* scans, size_t index,
                                nrdr_cloud** out);
void nrdr_scan_set_free(nrdr_scan_set* scans);

/* ---- rendering ------------------------------------------------------- */

/*
 * Render the scene from a pose (position + yaw about z at the given time) and
 * write one CSV row per ray: azimuth_rad, elevation_rad, expected_depth,
 * opacity_sum. Rows sweep elevation fastest.
 */
nrdr_status nrdr_render_depth_csv(const nrdr_scene* scene, const char* radar_json,
                                  const double position[3], double yaw,
                                  double time, uint64_t seed,
                                  const char* out_path);

/* ---- metrics ---------------------------------------------------------- */

/*
 * Chamfer distance, earth mover's distance and GOSPA (total + decomposition)
 * between two clouds, as a JSON object. Chamfer and EMD are null when either
 * cloud is empty.
 */
nrdr_status nrdr_eval_metrics(const nrdr_cloud* predictions,
                              const nrdr_cloud* truth, double gospa_cutoff,
                              char** out_json);

/* ---- decoders ---------------------------------------------------------- */

typedef struct nrdr_decoder nrdr_decoder;

/* Weight container written by nrdr_fit / nrdr_decoder_save (binary file plus
 * a .json sidecar describing the architecture). */
nrdr_status nrdr_decoder_load(const char* path, nrdr_decoder** out);
nrdr_status nrdr_decoder_save(const nrdr_decoder* decoder, const char* path);
/*
 * Render the scene from a pose, run the decoder and emit a detection cloud.
 * Probabilistic decoders draw one point-cloud sample with sample_seed;
 * deterministic ones threshold on existence and ignore sample_seed.
 */
nrdr_status nrdr_decoder_emit(const nrdr_decoder* decoder,
                              const nrdr_scene* scene, const char* radar_json,
                              const double position[3], double yaw, double time,
                              uint64_t render_seed, uint64_t sample_seed,
                              nrdr_cloud** out);
void nrdr_decoder_free(nrdr_decoder* decoder);

/* ---- experiments -------------------------------------------------------- */

/*
 * Train on the even scans of the configured trajectory and write weights to
 * weights_path. Returns a JSON summary ({"iterations", "first_loss",
 * "final_loss"}) through out_summary when it is non-NULL.
 */
nrdr_status nrdr_fit(const char* config_path, const char* weights_path,
                     char** out_summary);

/*
 * Full run: synthesize scans, train, evaluate held-out scans, write report
 * and artifacts to the output directory (config value, overridable). Returns
 * the report JSON through out_report when it is non-NULL. Output bytes are a
 * pure function of the config contents.
 */
nrdr_status nrdr_run_experiment(const char* config_path,
                                const char* output_dir_override,
                                char** out_report);

#ifdef __cplusplus
}
#endif

#endif /* NRDR_H */
