#ifndef DETOXKIT_H
#define DETOXKIT_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DetoxStatus {
  DETOX_STATUS_OK = 0,
  DETOX_STATUS_NULL_ARGUMENT = 1,
  DETOX_STATUS_INVALID_UTF8 = 2,
  DETOX_STATUS_IO = 3,
  DETOX_STATUS_SCHEMA = 4,
  DETOX_STATUS_PROTOCOL = 5,
  DETOX_STATUS_INVALID = 6,
  DETOX_STATUS_SCRIPT = 7,
  DETOX_STATUS_PANIC = 8,
} DetoxStatus;

/**
 * Trained toxicity classifier.
 */
typedef struct DetoxClassifier DetoxClassifier;

/**
 * Tagger plus generator.
 */
typedef struct DetoxPipeline DetoxPipeline;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *detox_last_error(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void detox_string_free(char *s);

/**
 * Builds a pipeline. A null `tagger_model` means every token is kept; a
 * null `lexicon` means masked spans are deleted.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be writable.
 */
enum DetoxStatus detox_pipeline_new(const char *tagger_model,
                                    const char *lexicon,
                                    struct DetoxPipeline **out);

/**
 * Detoxifies one sentence; the result goes to `*out`.
 *
 * # Safety
 * `pipeline` must come from [`detox_pipeline_new`]; `text` must be
 * NUL-terminated; `out` must be writable.
 */
enum DetoxStatus detox_pipeline_run(const struct DetoxPipeline *pipeline,
                                    const char *text,
                                    char **out);

/**
 * # Safety
 * `pipeline` must be null or come from [`detox_pipeline_new`], and must
 * not be used afterwards.
 */
void detox_pipeline_free(struct DetoxPipeline *pipeline);

/**
 * Edit record of `source` → `target` as JSON:
 * `{source, target, tags, gaps, ops}`.
 *
 * # Safety
 * Strings must be NUL-terminated; `out` must be writable.
 */
enum DetoxStatus detox_extract_edits_json(const char *source,
                                          const char *target,
                                          bool case_fold,
                                          char **out);

/**
 * Loads a classifier written by `detoxkit train-clf`.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum DetoxStatus detox_classifier_load(const char *path, struct DetoxClassifier **out);

/**
 * Probability that `text` is toxic.
 *
 * # Safety
 * `classifier` must come from [`detox_classifier_load`]; `text` must be
 * NUL-terminated; `out` must be writable.
 */
enum DetoxStatus detox_classifier_score(const struct DetoxClassifier *classifier,
                                        const char *text,
                                        double *out);

/**
 * # Safety
 * `classifier` must be null or come from [`detox_classifier_load`], and
 * must not be used afterwards.
 */
void detox_classifier_free(struct DetoxClassifier *classifier);

/**
 * Default content similarity between a source and its rewrite.
 *
 * # Safety
 * Strings must be NUL-terminated; `out` must be writable.
 */
enum DetoxStatus detox_sim(const char *source, const char *output, double *out);

/**
 * Krippendorff's alpha for annotations given as TSV text
 * (`sample_id<TAB>worker_id<TAB>answer` per line). `degenerate` is set when
 * all answers were identical.
 *
 * # Safety
 * `annotations_tsv` must be NUL-terminated; out pointers must be writable.
 */
enum DetoxStatus detox_alpha(const char *annotations_tsv, double *out, bool *degenerate);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DETOXKIT_H */
