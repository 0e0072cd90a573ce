/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef MISINFO_H
#define MISINFO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MisinfoStatus {
  MISINFO_STATUS_OK = 0,
  MISINFO_STATUS_NULL_ARGUMENT = 1,
  MISINFO_STATUS_INVALID_UTF8 = 2,
  MISINFO_STATUS_IO = 3,
  MISINFO_STATUS_FORMAT = 4,
  MISINFO_STATUS_SCHEMA = 5,
  MISINFO_STATUS_VALIDATION = 6,
  MISINFO_STATUS_NOT_FOUND = 7,
  MISINFO_STATUS_UNRESOLVED_TIES = 8,
  MISINFO_STATUS_CONTRACT = 9,
  MISINFO_STATUS_DEGENERATE = 10,
  MISINFO_STATUS_NUMERIC = 11,
  MISINFO_STATUS_VERSION = 12,
  MISINFO_STATUS_SPACE_MISMATCH = 13,
  MISINFO_STATUS_PANIC = 14,
} MisinfoStatus;

/*
 Binary class of a prediction or metric view.
 */
typedef enum MisinfoLabel {
  MISINFO_LABEL_M = 0,
  MISINFO_LABEL_T = 1,
} MisinfoLabel;

/*
 The five annotation classes.
 */
typedef enum MisinfoAnnotationLabel {
  MISINFO_ANNOTATION_LABEL_T = 0,
  MISINFO_ANNOTATION_LABEL_M = 1,
  MISINFO_ANNOTATION_LABEL_I = 2,
  MISINFO_ANNOTATION_LABEL_N = 3,
  MISINFO_ANNOTATION_LABEL_U = 4,
} MisinfoAnnotationLabel;

/*
 A compiled keyword glossary.
 */
typedef struct MisinfoMatcher MisinfoMatcher;

/*
 A trained classifier with its feature space.
 */
typedef struct MisinfoModel MisinfoModel;

/*
 Stopword lists plus the text pipeline.
 */
typedef struct MisinfoPreprocessor MisinfoPreprocessor;

typedef struct MisinfoPrediction {
  enum MisinfoLabel label;
  /*
   Positive favours T.
   */
  double score;
} MisinfoPrediction;

typedef struct MisinfoClassMetrics {
  double precision;
  double recall;
  double f1;
} MisinfoClassMetrics;

typedef struct MisinfoVote {
  /*
   0 decided, 1 tie, 2 no labels.
   */
  uint32_t status;
  /*
   Valid only when `status` is 0.
   */
  enum MisinfoAnnotationLabel decided;
  bool needs_adjudication;
} MisinfoVote;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or NULL. The pointer
 stays valid until the next call into this library on the same thread.
 */
const char *misinfo_last_error(void);

/*
 Library version string (static, do not free).
 */
const char *misinfo_version(void);

/*
 # Safety
 `s` is NULL or was returned by this library and not yet freed.
 */
void misinfo_string_free(char *s);

/*
 Creates a preprocessor. `stopword_dir` may be NULL for the bundled lists;
 otherwise it names a directory holding `stopwords.english` and
 `stopwords.trivial`.

 # Safety
 `stopword_dir` is NULL or a valid C string; `out` is a valid pointer.
 */
enum MisinfoStatus misinfo_preprocessor_new(const char *stopword_dir,
                                            struct MisinfoPreprocessor **out);

/*
 # Safety
 `p` is NULL or a handle from [`misinfo_preprocessor_new`].
 */
void misinfo_preprocessor_free(struct MisinfoPreprocessor *p);

/*
 Stems of `text` as a JSON array of strings, written to `*out_json`.

 # Safety
 `p` is a live preprocessor, `text` a valid C string, `out_json` a valid pointer.
 */
enum MisinfoStatus misinfo_preprocess(const struct MisinfoPreprocessor *p,
                                      const char *text,
                                      char **out_json);

/*
 Compiles a glossary file, or the bundled glossary when `glossary_path` is NULL.

 # Safety
 `glossary_path` is NULL or a valid C string; `out` is a valid pointer.
 */
enum MisinfoStatus misinfo_matcher_new(const char *glossary_path, struct MisinfoMatcher **out);

/*
 # Safety
 `m` is NULL or a handle from [`misinfo_matcher_new`].
 */
void misinfo_matcher_free(struct MisinfoMatcher *m);

/*
 Sets `*matched` and, when `out_json` is not NULL, writes the matches as a
 JSON array of `{keyword, source}` objects.

 # Safety
 `m` is a live matcher, `text` a valid C string, `matched` a valid
 pointer, `out_json` NULL or a valid pointer.
 */
enum MisinfoStatus misinfo_matcher_match(const struct MisinfoMatcher *m,
                                         const char *text,
                                         bool *matched,
                                         char **out_json);

/*
 Loads a model file and its feature space. `space_path` may be NULL, in
 which case `<model_path>.space.json` is used.

 # Safety
 `model_path` is a valid C string, `space_path` NULL or a valid C string,
 `out` a valid pointer.
 */
enum MisinfoStatus misinfo_model_load(const char *model_path,
                                      const char *space_path,
                                      struct MisinfoModel **out);

/*
 # Safety
 `m` is NULL or a handle from [`misinfo_model_load`].
 */
void misinfo_model_free(struct MisinfoModel *m);

/*
 Classifies already-preprocessed tokens.

 # Safety
 `m` is a live model; `tokens` points to `n` valid C strings (may be
 NULL when `n` is 0); `out` is a valid pointer.
 */
enum MisinfoStatus misinfo_model_predict_tokens(const struct MisinfoModel *m,
                                                const char *const *tokens,
                                                size_t n,
                                                struct MisinfoPrediction *out);

/*
 Preprocesses `text` with `p` and classifies it with `m`.

 # Safety
 `m` and `p` are live handles, `text` a valid C string, `out` a valid pointer.
 */
enum MisinfoStatus misinfo_model_predict_text(const struct MisinfoModel *m,
                                              const struct MisinfoPreprocessor *p,
                                              const char *text,
                                              struct MisinfoPrediction *out);

/*
 Precision, recall and F1 of class `c` for a confusion matrix given in
 the M-positive view.

 # Safety
 `out` is a valid pointer.
 */
enum MisinfoStatus misinfo_class_metrics(uint64_t tp_m,
                                         uint64_t fp_m,
                                         uint64_t fn_m,
                                         uint64_t tn_m,
                                         enum MisinfoLabel c,
                                         struct MisinfoClassMetrics *out);

/*
 Accuracy (mean of per-class accuracies) and macro-F1.

 # Safety
 `accuracy` and `macro_f1` are valid pointers.
 */
enum MisinfoStatus misinfo_aggregate(uint64_t tp_m,
                                     uint64_t fp_m,
                                     uint64_t fn_m,
                                     uint64_t tn_m,
                                     double *accuracy,
                                     double *macro_f1);

/*
 Plurality vote over `n` annotation labels.

 # Safety
 `labels` points to `n` valid values (may be NULL when `n` is 0); `out`
 is a valid pointer.
 */
enum MisinfoStatus misinfo_majority_vote(const enum MisinfoAnnotationLabel *labels,
                                         size_t n,
                                         struct MisinfoVote *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MISINFO_H */
