/*
 * Copyright 2026 The geofeat Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to geofeat. Every call returns a gf_status; on failure
 * gf_last_error() holds a message for the calling thread. Strings returned
 * through char** are owned by the caller and released with gf_string_free. */

#ifndef GEOFEAT_GEOFEAT_H_
#define GEOFEAT_GEOFEAT_H_

#include <stddef.h>
#include <stdint.h>

#if defined(GEOFEAT_BUILDING_LIBRARY)
#define GF_API __attribute__((visibility("default")))
#else
#define GF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gf_status {
  GF_OK = 0,
  GF_ERR_USAGE = 1,    /* bad arguments or configuration */
  GF_ERR_DATA = 2,     /* malformed or invalid input data */
  GF_ERR_IO = 3,
  GF_ERR_NUMERIC = 4,  /* non-finite values */
  GF_ERR_INTERNAL = 5
} gf_status;

GF_API const char* gf_last_error(void);
GF_API const char* gf_version(void);
GF_API void gf_string_free(char* s);

/* Receives one line of progress or log output, without the newline. */
typedef void (*gf_log_fn)(const char* line, void* user);

/* Flat key = value settings. */
typedef struct gf_config gf_config;

GF_API gf_status gf_config_new(gf_config** out);
/* Merges the file's entries over the current ones. */
GF_API gf_status gf_config_load(gf_config* config, const char* path);
GF_API gf_status gf_config_set(gf_config* config, const char* key, const char* value);
/* Parses "key=value". */
GF_API gf_status gf_config_set_assignment(gf_config* config, const char* assignment);
GF_API gf_status gf_config_dump(const gf_config* config, char** out);
GF_API void gf_config_free(gf_config* config);

/* Trained or freshly initialized feature network. */
typedef struct gf_model gf_model;

GF_API gf_status gf_model_load(const char* checkpoint, gf_model** out);
/* Seeded initialization from the training keys seed, plan, feature_dim. */
GF_API gf_status gf_model_init(const gf_config* config, gf_model** out);
GF_API gf_status gf_model_save(const gf_model* model, const char* checkpoint);
GF_API int gf_model_feature_dim(const gf_model* model);
/* rgb: height x width x 3 floats in [0,1]. out receives height x width x
 * feature_dim unit vectors; out_len is its capacity in floats. */
GF_API gf_status gf_model_extract(const gf_model* model, const float* rgb, int width,
                                  int height, float* out, size_t out_len);
GF_API void gf_model_free(gf_model* model);

/* Commands. Each logs its fully resolved settings through `log` (may be
 * NULL) as "key = value" lines before doing any work. */

/* Renders a dataset into out_dir. */
GF_API gf_status gf_run_gen_data(const gf_config* config, const char* out_dir, gf_log_fn log,
                                 void* user);

/* Trains on train_manifest; val_manifest and log_path may be NULL. The
 * training log goes to log_path and through `log`. */
GF_API gf_status gf_run_train(const gf_config* config, const char* train_manifest,
                              const char* val_manifest, const char* checkpoint_out,
                              const char* log_path, gf_log_fn log, void* user);

/* Matches image1 to image2 (PNG). Writes <out_prefix>.flo and
 * <out_prefix>_visibility.png, plus <out_prefix>_heatmap.png when the
 * config has probe = x,y. Optional keys: fg1, fg2 (PNG masks or face-index
 * PFMs). */
GF_API gf_status gf_run_match(const gf_config* config, const char* checkpoint,
                              const char* image1, const char* image2, const char* out_prefix,
                              gf_log_fn log, void* user);

/* Writes the metrics table for a manifest. checkpoint may be NULL when the
 * config sets oracle = true. Optional key: max_pairs. */
GF_API gf_status gf_run_eval(const gf_config* config, const char* checkpoint,
                             const char* manifest, const char* table_out, gf_log_fn log,
                             void* user);

/* Warps `source` (the second image) into the first image's frame. The
 * field comes from the flow key (.flo file) or from matching image1 against
 * source with the checkpoint. */
GF_API gf_status gf_run_warp(const gf_config* config, const char* checkpoint,
                             const char* image1, const char* source, const char* out_png,
                             gf_log_fn log, void* user);

/* Morph frames between image1 (t = 0) and image2 (t = 1). Keys: t, or
 * frames = n for n evenly spaced frames written as <stem>_<i>.png; flow12
 * and flow21 (.flo) replace matching with the checkpoint. */
GF_API gf_status gf_run_morph(const gf_config* config, const char* checkpoint,
                              const char* image1, const char* image2, const char* out_png,
                              gf_log_fn log, void* user);

/* Distances from a source on a mesh. Keys: source (v:<index> or
 * f:<face>:<b1>,<b2>), method (exact | graph), k, compare. Writes one value
 * per vertex as text, or a one-row PFM when out ends in .pfm; with
 * compare = true the exact-vs-graph report goes through `log`. */
GF_API gf_status gf_run_geodesic(const gf_config* config, const char* mesh, const char* out,
                                 gf_log_fn log, void* user);

#ifdef __cplusplus
}
#endif

#endif /* GEOFEAT_GEOFEAT_H_ */
