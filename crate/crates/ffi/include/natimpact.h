#ifndef NATIMPACT_H
#define NATIMPACT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum NiStatus {
  NI_STATUS_OK = 0,
  NI_STATUS_NULL_POINTER = 1,
  NI_STATUS_INVALID_ARGUMENT = 2,
  NI_STATUS_PARSE_ERROR = 3,
  NI_STATUS_IO_ERROR = 4,
  NI_STATUS_OUT_OF_RANGE = 5,
  NI_STATUS_NO_ARTICLES = 6,
  NI_STATUS_DEGENERATE = 7,
  NI_STATUS_NOT_IDENTIFIED = 8,
  NI_STATUS_INSUFFICIENT_DATA = 9,
  NI_STATUS_PANIC = 10,
} NiStatus;

typedef enum NiCiMode {
  // Literal for REG_GEO, corrected for GEO.
  NI_CI_MODE_DEFAULT = 0,
  NI_CI_MODE_LITERAL = 1,
  NI_CI_MODE_CORRECTED = 2,
} NiCiMode;

typedef enum NiMethod {
  NI_METHOD_REG_GEO = 0,
  NI_METHOD_GEO = 1,
  NI_METHOD_ARITH = 2,
  NI_METHOD_TOP_X = 3,
} NiMethod;

// Parsed corpus: subject/year slices ordered by subject then year.
typedef struct NiCorpus NiCorpus;

// Focal country list.
typedef struct NiCountrySet NiCountrySet;

typedef struct NiOptions {
  double level;
  double top_x;
  enum NiCiMode ci_mode;
  // GEO intervals from the bootstrap instead of the analytic formula.
  bool geo_bootstrap;
  size_t replicates;
  uint64_t seed;
} NiOptions;

// An indicator and its intervals. Interval fields are NaN when `has_ci`
// is false; `mean` is NaN for TOP_X.
typedef struct NiIndicator {
  double estimate;
  bool has_ci;
  double ci_low;
  double ci_high;
  double n_c;
  double mean;
  double mean_ci_low;
  double mean_ci_high;
} NiIndicator;

typedef struct NiMoments {
  size_t n;
  double mean;
  double skewness;
  double kurtosis;
  bool skewness_acceptable;
  bool kurtosis_acceptable;
} NiMoments;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (truncated,
// always NUL-terminated when `len > 0`) and returns its full length in
// bytes, or 0 if the last call succeeded.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t ni_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *ni_version(void);

// Parses a corpus CSV file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum NiStatus ni_corpus_parse_file(const char *path, struct NiCorpus **out);

// Parses corpus CSV text.
//
// # Safety
// `csv` must be a NUL-terminated string; `out` must be writable.
enum NiStatus ni_corpus_parse_str(const char *csv, struct NiCorpus **out);

// # Safety
// `corpus` must be null or a handle from `ni_corpus_parse_*` not yet freed.
void ni_corpus_free(struct NiCorpus *corpus);

// # Safety
// `corpus` must be a live handle; `out` must be writable.
enum NiStatus ni_corpus_slice_count(const struct NiCorpus *corpus, size_t *out);

// Year and article count of slice `index`.
//
// # Safety
// `corpus` must be a live handle; `year` and `articles` must be writable.
enum NiStatus ni_corpus_slice_info(const struct NiCorpus *corpus,
                                   size_t index,
                                   int32_t *year,
                                   size_t *articles);

// Copies the subject label of slice `index` into `buf` like
// [`ni_last_error_message`] and stores its full length in `needed`.
//
// # Safety
// `corpus` must be a live handle; `buf` must be null or hold `len` bytes;
// `needed` must be writable.
enum NiStatus ni_corpus_slice_subject(const struct NiCorpus *corpus,
                                      size_t index,
                                      char *buf,
                                      size_t len,
                                      size_t *needed);

// Index of the slice for (`subject`, `year`).
//
// # Safety
// `corpus` must be a live handle; `subject` NUL-terminated; `out` writable.
enum NiStatus ni_corpus_find_slice(const struct NiCorpus *corpus,
                                   const char *subject,
                                   int32_t year,
                                   size_t *out);

// Parses a comma-separated focal list such as `"US,UK"`.
//
// # Safety
// `list` must be NUL-terminated; `out` must be writable.
enum NiStatus ni_country_set_parse(const char *list, struct NiCountrySet **out);

// # Safety
// `set` must be null or a handle from `ni_country_set_parse` not yet freed.
void ni_country_set_free(struct NiCountrySet *set);

// # Safety
// `set` must be a live handle; `out` must be writable.
enum NiStatus ni_country_set_len(const struct NiCountrySet *set, size_t *out);

// Defaults: level 0.95, X = 10, per-method CI mode, analytic GEO
// intervals, 999 bootstrap replicates, seed 0.
struct NiOptions ni_options_default(void);

// One indicator for `country` in slice `index`. `options` may be null for
// the defaults. An unavailable interval is not an error: `has_ci` is false.
//
// # Safety
// Handles must be live; `country` NUL-terminated; `options` null or valid;
// `out` writable.
enum NiStatus ni_indicator(const struct NiCorpus *corpus,
                           size_t index,
                           const struct NiCountrySet *countries,
                           const char *country,
                           enum NiMethod method,
                           const struct NiOptions *options,
                           struct NiIndicator *out);

// Fractional article count `n_c` of `country` in slice `index`.
//
// # Safety
// Handles must be live; `country` NUL-terminated; `out` writable.
enum NiStatus ni_weighted_count(const struct NiCorpus *corpus,
                                size_t index,
                                const struct NiCountrySet *countries,
                                const char *country,
                                double *out);

// Skewness and non-excess kurtosis of `len` values.
//
// # Safety
// `values` must point to `len` doubles; `out` writable.
enum NiStatus ni_moments(const double *values, size_t len, struct NiMoments *out);

// Weighted geometric mean `exp(Σ w ln(1+c) / Σ w) − 1`.
//
// # Safety
// `citations` and `weights` must each point to `len` elements; `out` writable.
enum NiStatus ni_geometric_mean(const uint64_t *citations,
                                const double *weights,
                                size_t len,
                                double *out);

// Weighted arithmetic mean `Σ w c / Σ w`.
//
// # Safety
// `citations` and `weights` must each point to `len` elements; `out` writable.
enum NiStatus ni_arithmetic_mean(const uint64_t *citations,
                                 const double *weights,
                                 size_t len,
                                 double *out);

// Top-X% credit of each article, with threshold ties split fractionally.
//
// # Safety
// `citations` must point to `len` elements and `credits` to `len` writable
// doubles.
enum NiStatus ni_top_credits(const uint64_t *citations, size_t len, double x, double *credits);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NATIMPACT_H */
