#ifndef RBNN_H
#define RBNN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RbnnStatus {
  RBNN_STATUS_OK = 0,
  RBNN_STATUS_NULL_POINTER = 1,
  RBNN_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Receiver on top of an (image) source.
   */
  RBNN_STATUS_SINGULARITY = 3,
  RBNN_STATUS_PARSE = 4,
  RBNN_STATUS_IO = 5,
  RBNN_STATUS_DOMAIN = 6,
  RBNN_STATUS_PANIC = 7,
} RbnnStatus;

/**
 * Opaque trained model.
 */
typedef struct RbnnModel RbnnModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *rbnn_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *rbnn_last_error(void);

/**
 * Parses a model checkpoint from JSON text.
 *
 * # Safety
 * `json` must be NUL-terminated; `out` must be writable.
 */
enum RbnnStatus rbnn_model_from_json(const char *json, struct RbnnModel **out);

/**
 * Loads a model checkpoint file.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum RbnnStatus rbnn_model_load(const char *path, struct RbnnModel **out);

/**
 * Releases a model. NULL is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void rbnn_model_free(struct RbnnModel *model);

/**
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum RbnnStatus rbnn_model_num_params(const struct RbnnModel *model, size_t *out);

/**
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum RbnnStatus rbnn_model_n_ray(const struct RbnnModel *model, size_t *out);

/**
 * Field amplitude at one point `xyz[3]`.
 *
 * # Safety
 * `xyz` must point to 3 doubles; `out` must be writable.
 */
enum RbnnStatus rbnn_predict(const struct RbnnModel *model, const double *xyz, double *out);

/**
 * Amplitudes at `n` points stored as `xyz[3 * n]`. Singular points get NaN
 * and the call still succeeds; any other failure aborts the batch.
 *
 * # Safety
 * `xyz` must hold `3 * n` doubles and `out` room for `n`.
 */
enum RbnnStatus rbnn_predict_many(const struct RbnnModel *model,
                                  const double *xyz,
                                  size_t n,
                                  double *out);

/**
 * Complex image-source field for an environment given as JSON.
 *
 * # Safety
 * `environment_json` must be NUL-terminated, `source` and `receiver` must
 * hold 3 doubles, `re` and `im` must be writable.
 */
enum RbnnStatus rbnn_field_ism(const char *environment_json,
                               double frequency,
                               const double *source,
                               const double *receiver,
                               int64_t max_order,
                               double *re,
                               double *im);

/**
 * Rayleigh reflection coefficient at incidence `gamma` (radians from the
 * normal).
 *
 * # Safety
 * `re` and `im` must be writable.
 */
enum RbnnStatus rbnn_rayleigh_coeff(double gamma,
                                    double rho_r,
                                    double c_r,
                                    double delta,
                                    double *re,
                                    double *im);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RBNN_H */
