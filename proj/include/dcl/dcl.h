/*
 * C interface to the dual contrastive learning toolkit.
 *
 * Objects are opaque handles created by dcl_*_load / dcl_*_new / dcl_train
 * and released with the matching dcl_*_free (free functions accept NULL).
 * Every fallible call returns a dcl_status; on failure the message is
 * available from dcl_last_error() on the same thread until the next call.
 *
 * Loaded datasets, lexicons, embeddings and models are immutable and may be
 * shared between threads. Configs are mutable and must not be modified
 * concurrently.
 */
#ifndef DCL_H
#define DCL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(DCL_BUILDING_LIBRARY)
#    define DCL_API __declspec(dllexport)
#  else
#    define DCL_API __declspec(dllimport)
#  endif
#else
#  define DCL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values match the CLI exit codes. */
typedef enum dcl_status {
    DCL_OK = 0,
    DCL_ERR_USAGE = 1,
    DCL_ERR_DATA = 2,
    DCL_ERR_NUMERICAL = 3,
    DCL_ERR_INTERNAL = 4
} dcl_status;

typedef struct dcl_dataset dcl_dataset;
typedef struct dcl_lexicon dcl_lexicon;
typedef struct dcl_embeddings dcl_embeddings;
typedef struct dcl_config dcl_config;
typedef struct dcl_model dcl_model;

DCL_API const char* dcl_version(void);
DCL_API const char* dcl_last_error(void);

typedef void (*dcl_warning_fn)(const char* message, void* user);
/* NULL restores the default (stderr). */
DCL_API void dcl_set_warning_handler(dcl_warning_fn fn, void* user);

/* ---- data ------------------------------------------------------------ */

/* format: "csv", "tsv", "jsonl", or NULL to infer from the extension. */
DCL_API dcl_status dcl_dataset_load(const char* path, const char* format, dcl_dataset** out);
DCL_API size_t dcl_dataset_size(const dcl_dataset* dataset);
DCL_API void dcl_dataset_free(dcl_dataset* dataset);

DCL_API dcl_status dcl_lexicon_load(const char* path, dcl_lexicon** out);
DCL_API size_t dcl_lexicon_size(const dcl_lexicon* lexicon);
DCL_API void dcl_lexicon_free(dcl_lexicon* lexicon);

DCL_API dcl_status dcl_embeddings_load(const char* path, dcl_embeddings** out);
DCL_API size_t dcl_embeddings_size(const dcl_embeddings* embeddings);
DCL_API size_t dcl_embeddings_dim(const dcl_embeddings* embeddings);
DCL_API void dcl_embeddings_free(dcl_embeddings* embeddings);

typedef struct dcl_class_stats {
    size_t total;
    size_t positives;
    size_t negatives;
    double positive_share;
    double negatives_per_positive; /* ratio reads 1 : this */
    int has_lexicon;
    size_t matched_positives;
    size_t matched_negatives;
    double matched_positive_pct;
    double matched_negative_pct;
    double matched_total_pct;
} dcl_class_stats;

/* lexicon may be NULL. */
DCL_API dcl_status dcl_class_stats_compute(const dcl_dataset* dataset, const dcl_lexicon* lexicon,
                                           dcl_class_stats* out);

/* ---- config ---------------------------------------------------------- */

DCL_API dcl_status dcl_config_new(dcl_config** out);
DCL_API dcl_status dcl_config_load(const char* path, dcl_config** out);
DCL_API dcl_status dcl_config_set(dcl_config* config, const char* key, const char* value);
DCL_API dcl_status dcl_config_validate(const dcl_config* config);
/* snprintf-style: writes up to capacity bytes, returns the full length. */
DCL_API size_t dcl_config_to_text(const dcl_config* config, char* buffer, size_t capacity);
DCL_API void dcl_config_free(dcl_config* config);

/* ---- training -------------------------------------------------------- */

typedef struct dcl_loss_breakdown {
    double cl_se;
    double cl_su;
    double cl;
    double fl;
    double total;
} dcl_loss_breakdown;

typedef struct dcl_metrics {
    double accuracy;
    double precision[2]; /* indexed by class: 0 non-hate, 1 hate */
    double recall[2];
    double f1[2];
    size_t support[2];
    double macro_f1;
    double weighted_f1;
    size_t tp, fp, fn, tn;
} dcl_metrics;

typedef struct dcl_epoch_report {
    size_t epoch;
    dcl_loss_breakdown loss;
    double seconds;
    dcl_metrics train;
    int has_validation;
    dcl_metrics validation;
} dcl_epoch_report;

typedef void (*dcl_epoch_fn)(const dcl_epoch_report* report, void* user);

typedef struct dcl_train_options {
    const dcl_dataset* validation;   /* optional */
    const dcl_embeddings* embeddings; /* optional; NULL uses the hashing featurizer */
    const dcl_model* resume;         /* optional checkpoint to continue from */
    dcl_epoch_fn on_epoch;           /* optional */
    void* user;
} dcl_train_options;

/* options may be NULL. On a numerical abort, *out is left NULL. */
DCL_API dcl_status dcl_train(const dcl_dataset* data, const dcl_config* config, const dcl_train_options* options,
                             dcl_model** out);

DCL_API dcl_status dcl_model_save(const dcl_model* model, const char* path);
DCL_API dcl_status dcl_model_load(const char* path, dcl_model** out);
DCL_API size_t dcl_model_epochs(const dcl_model* model);
DCL_API dcl_status dcl_model_epoch_report(const dcl_model* model, size_t index, dcl_epoch_report* out);
/* Copy of the config the model was trained with. */
DCL_API dcl_status dcl_model_config(const dcl_model* model, dcl_config** out);
DCL_API void dcl_model_free(dcl_model* model);

/* ---- evaluation ------------------------------------------------------ */

/* embeddings and lexicon may be NULL. With a lexicon only matching records
 * are scored; evaluated (may be NULL) receives the number scored. */
DCL_API dcl_status dcl_evaluate(const dcl_model* model, const dcl_dataset* dataset, const dcl_embeddings* embeddings,
                                const dcl_lexicon* lexicon, dcl_metrics* out, size_t* evaluated);

typedef struct dcl_summary {
    double mean;
    double stddev;
} dcl_summary;

typedef struct dcl_crossval_summary {
    dcl_summary accuracy;
    dcl_summary macro_f1;
    dcl_summary weighted_f1;
} dcl_crossval_summary;

/* folds (may be NULL) must hold k entries. */
DCL_API dcl_status dcl_crossval(const dcl_dataset* dataset, const dcl_config* config, const dcl_embeddings* embeddings,
                                size_t k, size_t jobs, dcl_metrics* folds, dcl_crossval_summary* summary);

DCL_API dcl_status dcl_export_embeddings(const dcl_model* model, const dcl_dataset* dataset,
                                         const dcl_embeddings* embeddings, const char* path);

/* ---- gradient checking ----------------------------------------------- */

typedef struct dcl_gradcheck_case {
    const char* name;
    size_t coordinates;
    size_t failures;
    double worst_error;
} dcl_gradcheck_case;

typedef void (*dcl_gradcheck_fn)(const dcl_gradcheck_case* result, void* user);

/* Returns DCL_ERR_NUMERICAL when any case fails. Counts may be NULL. */
DCL_API dcl_status dcl_gradcheck(uint64_t seed, dcl_gradcheck_fn on_case, void* user, size_t* cases,
                                 size_t* failed_cases);

/* ---- raw loss kernels ------------------------------------------------ */

/* views: n_pairs * 2 * dim doubles laid out as a_0, b_0, a_1, b_1, ...
 * grads (may be NULL) receives the same layout. */
DCL_API dcl_status dcl_loss_cl_se(const double* views, size_t n_pairs, size_t dim, double tau, double* loss,
                                  double* grads);

/* vectors: n * dim doubles; grads (may be NULL) n * dim. */
DCL_API dcl_status dcl_loss_cl_su(const double* vectors, const int* labels, size_t n, size_t dim, double tau,
                                  double* loss, double* grads);

/* grads (may be NULL) receives d loss / d p_i. */
DCL_API dcl_status dcl_loss_focal(const double* probs, const int* labels, size_t n, double alpha, double gamma,
                                  double* loss, double* grads);

#ifdef __cplusplus
}
#endif

#endif /* DCL_H */
