/*
 * Copyright 2026 The fairscarce Authors.
 *
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

/* C interface to fairscarce. Every call returns an fs_status; on failure the
 * message is available from fs_last_error_message() on the same thread. */

#ifndef FAIRSCARCE_FAIRSCARCE_H_
#define FAIRSCARCE_FAIRSCARCE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FS_API __declspec(dllexport)
#else
#define FS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fs_status {
  FS_OK = 0,
  FS_INVALID_ARGUMENT = 1,
  FS_IO = 2,
  FS_EMPTY_FILE = 3,
  FS_MISSING_COLUMN = 4,
  FS_MALFORMED_ROW = 5,
  FS_EMPTY_FIT = 6,
  FS_UNKNOWN_CATEGORY = 7,
  FS_INSUFFICIENT_ROWS = 8,
  FS_SHAPE_MISMATCH = 9,
  FS_NON_FINITE_GRADIENT = 10,
  FS_DIVERGED_TRAINING = 11,
  FS_EMPTY_CALIBRATION = 12,
  FS_DEGENERATE_GROUP = 13,
  FS_DEGENERATE_CELL = 14,
  FS_NON_FINITE_COST = 15,
  FS_EMPTY_SELECTION = 16,
  FS_CONFIG = 17,
  FS_FORMAT = 18,
  FS_INTERNAL = 99
} fs_status;

FS_API const char* fs_version(void);
FS_API const char* fs_status_name(int status);
/* Message of the last failed call on this thread; "" if none. */
FS_API const char* fs_last_error_message(void);
/* Frees strings returned through char** out-parameters. */
FS_API void fs_string_free(char* s);

/* ---- datasets ---- */

typedef struct fs_dataset fs_dataset;

FS_API fs_status fs_dataset_load_csv(const char* csv_path, const char* schema_path, fs_dataset** out);
FS_API size_t fs_dataset_rows(const fs_dataset* ds);
FS_API size_t fs_dataset_dim(const fs_dataset* ds);
/* Copies row-major features (rows x dim) into `out`. */
FS_API fs_status fs_dataset_features(const fs_dataset* ds, double* out, size_t capacity);
FS_API void fs_dataset_free(fs_dataset* ds);

/* ---- attribute classifier ---- */

typedef struct fs_attr_options {
  double ratio;
  double test_fraction;
  uint64_t seed;
  double lambda_max;
  int max_epochs;
  int patience;
  int mc_passes;
  int batch_universe; /* nonzero: consistency denominator is the batch */
} fs_attr_options;

typedef struct fs_attr_summary {
  double attribute_accuracy;
  double mean_uncertainty;
  size_t d1_rows;
  size_t d2_rows;
  int epochs;
  int best_epoch;
} fs_attr_summary;

FS_API void fs_attr_options_default(fs_attr_options* opts);
/* Trains and writes a run directory (datasets, checkpoint, proxies.csv, ...). */
FS_API fs_status fs_train_attribute(const char* csv_path, const char* schema_path,
                                    const fs_attr_options* opts, const char* run_dir,
                                    fs_attr_summary* summary);
FS_API fs_status fs_read_attribute_summary(const char* run_dir, fs_attr_summary* summary);

/* ---- fair training ---- */

typedef struct fs_fair_options {
  const char* variant;     /* clean, proxy-dnn, proxy-knn, certain, weighted, uncertain, ... */
  const char* constraint;  /* dp, eod, eop */
  const char* uncertainty; /* mc-dropout, conformal:E, confidence:T */
  double eps;
  double h;
  uint64_t seed;
  int iterations;
  double eta;
  double bound;
  int use_stumps;
  size_t knn_k;
  double train_fraction;
} fs_fair_options;

typedef struct fs_group_counts {
  double n, positives, tp, fp, fn, tn;
} fs_group_counts;

typedef struct fs_report {
  double accuracy;
  double dp;
  double eop;
  double eod;
  fs_group_counts groups[2];
  size_t train_rows;
} fs_report;

FS_API void fs_fair_options_default(fs_fair_options* opts);
/* Trains on 70% of the run's D1 and evaluates on the rest. `proxies_path`
 * may be NULL (use the run's proxies); `model_out` may be NULL. */
FS_API fs_status fs_train_fair(const char* run_dir, const char* proxies_path, const fs_fair_options* opts,
                               const char* model_out, fs_report* report);
/* CSV header and one row: method,seed,accuracy,dp,eop,eod and counts. */
FS_API fs_status fs_report_csv(const char* method, uint64_t seed, const fs_report* report, char** header,
                               char** row);

/* ---- experiments ---- */

/* `out_override` may be NULL. On FS_OK, *failed_cells counts failed cells. */
FS_API fs_status fs_run_sweep(const char* config_path, const char* out_override, size_t* failed_cells);
FS_API fs_status fs_write_table(const char* run_dir, char** text);
/* `uncertainty` may be NULL (MC dropout); use_stumps selects boosted stumps
 * over logistic regression. */
FS_API fs_status fs_run_threshold_study(const char* run_dir, const char* out_dir, size_t seeds,
                                        const char* uncertainty, int use_stumps);

FS_API fs_status fs_evaluate_report(const double* preds, const int* labels, const int* sensitive, size_t n,
                                    fs_report* report);
/* Writes indices of non-dominated points to idx_out (capacity >= n). */
FS_API fs_status fs_pareto_front(const double* accuracy, const double* unfairness, size_t n, size_t* idx_out,
                                 size_t* count);

/* ---- conformal calibration ---- */

typedef struct fs_calibrator fs_calibrator;

FS_API fs_status fs_calibrator_create(const double* probs, const int* truths, size_t n, double epsilon,
                                      fs_calibrator** out);
FS_API double fs_calibrator_qhat(const fs_calibrator* cal);
/* Writes "", "0", "1" or "01" into set_out (capacity >= 3). */
FS_API fs_status fs_calibrator_set(const fs_calibrator* cal, double p_group, char* set_out, size_t capacity);
FS_API void fs_calibrator_free(fs_calibrator* cal);

/* ---- attribute networks ---- */

typedef struct fs_mlp fs_mlp;

/* Loads the teacher network of an attribute checkpoint. */
FS_API fs_status fs_mlp_load(const char* checkpoint_path, fs_mlp** out);
FS_API size_t fs_mlp_input_dim(const fs_mlp* mlp);
/* MC-dropout mean probability and entropy per row; x is row-major. */
FS_API fs_status fs_mlp_predict(const fs_mlp* mlp, const double* x, size_t rows, size_t dim, int passes,
                                uint64_t seed, double* p_out, double* u_out);
FS_API void fs_mlp_free(fs_mlp* mlp);

#ifdef __cplusplus
}
#endif

#endif /* FAIRSCARCE_FAIRSCARCE_H_ */
