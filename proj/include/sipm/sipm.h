/*
 * Copyright 2026 The sipmamba Authors
 *
 * Licensed under the Apache License, Version 2.0
 */

#ifndef SIPM_SIPM_H_
#define SIPM_SIPM_H_

#include <stddef.h>
#include <stdint.h>

#if defined(SIPM_BUILDING_LIBRARY)
#define SIPM_API __attribute__((visibility("default")))
#else
#define SIPM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. The non-zero values double as CLI exit codes. */
typedef enum sipm_status {
  SIPM_OK = 0,
  SIPM_ERR_USAGE = 1,   /* bad argument, config or precondition */
  SIPM_ERR_DATA = 2,    /* malformed, missing or mismatched data */
  SIPM_ERR_NUMERIC = 3, /* non-finite values during computation */
  SIPM_ERR_INTERNAL = 4
} sipm_status;

typedef struct sipm_model sipm_model;

/* Message of the last failed call on this thread; "" after a success. */
SIPM_API const char* sipm_last_error(void);
SIPM_API const char* sipm_version(void);

/* Strings returned through char** out-parameters are owned by the caller. */
SIPM_API void sipm_string_free(char* s);

/* --- models ------------------------------------------------------------- */

/* config_json: model config object; NULL or "" gives the defaults. */
SIPM_API sipm_status sipm_model_create(const char* config_json, sipm_model** out);
SIPM_API sipm_status sipm_model_load(const char* checkpoint_path, sipm_model** out);
SIPM_API sipm_status sipm_model_save(const sipm_model* model, const char* checkpoint_path);
SIPM_API void sipm_model_free(sipm_model* model);

SIPM_API sipm_status sipm_model_param_count(const sipm_model* model, size_t* out);
SIPM_API sipm_status sipm_model_config(const sipm_model* model, char** out_json);
/* 1 when the model carries normalization statistics. */
SIPM_API sipm_status sipm_model_has_norm(const sipm_model* model, int* out);

/* Parameter count of a variant at the full-size defaults. */
SIPM_API sipm_status sipm_param_count_variant(const char* variant, int binaural, size_t* out);

/* Features are L x T x D_in row-major; audiograms hold `freqs` thresholds in
 * dB HL. Stored normalization statistics are applied first. The result is
 * the predicted intelligibility in percent. */
SIPM_API sipm_status sipm_predict_mono(const sipm_model* model, const float* feats, size_t layers,
                                       size_t frames, size_t dim, const float* audiogram,
                                       size_t freqs, double* out_percent);
SIPM_API sipm_status sipm_predict_binaural(const sipm_model* model, const float* feats_left,
                                           const float* feats_right, size_t layers, size_t frames,
                                           size_t dim, const float* audiogram_left,
                                           const float* audiogram_right, size_t freqs,
                                           double* out_percent);
/* Same, reading feature files. right_path and audiogram_right are NULL for
 * monaural models. */
SIPM_API sipm_status sipm_predict_files(const sipm_model* model, const char* left_path,
                                        const char* right_path, const double* audiogram_left,
                                        const double* audiogram_right, size_t freqs,
                                        double* out_percent);

/* --- data --------------------------------------------------------------- */

/* spec_json: fixture spec object (NULL for defaults). Writes the tree under
 * out_dir; out_summary_json (may be NULL) receives counts and paths. */
SIPM_API sipm_status sipm_gen_fixtures(const char* spec_json, const char* out_dir,
                                       char** out_summary_json);

/* Normalization statistics over `split` ("" for every entry), saved as JSON. */
SIPM_API sipm_status sipm_compute_stats(const char* manifest_path, const char* split,
                                        int per_layer, const char* out_path);

/* --- training and evaluation ---------------------------------------------- */

typedef void (*sipm_progress_fn)(uint64_t step, double loss, double lr, void* user);

/* run_json: {"model": {...}, "train": {...}, "per_layer_stats": true,
 * "train_split": "train", "val_split": "val"}; every key optional. */
SIPM_API sipm_status sipm_train(const char* manifest_path, const char* run_json,
                                const char* out_checkpoint, sipm_progress_fn progress,
                                void* user, char** out_summary_json);

/* Report JSON with rmse, ncc and per-sample predictions. */
SIPM_API sipm_status sipm_evaluate(const char* checkpoint_path, const char* manifest_path,
                                   const char* split, char** out_report_json);

/* run_json as for sipm_train plus "variants": [names] and "pools": [p...].
 * The report JSON holds "table_csv", "runs_csv" and "runs". */
SIPM_API sipm_status sipm_pooling_sweep(const char* manifest_path, const char* run_json,
                                        char** out_report_json);

/* bench_json: {"kinds": [...], "lengths": [...], "d": 384, "repetitions": 3,
 * "seed": 0, "min_seconds": 1e-4}; every key optional. */
SIPM_API sipm_status sipm_bench_scaling(const char* bench_json, char** out_report_json);

#ifdef __cplusplus
}
#endif

#endif /* SIPM_SIPM_H_ */
