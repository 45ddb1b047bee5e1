#ifndef SLIPT_H
#define SLIPT_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Outcome of a fallible call.
typedef enum SliptStatus {
  SLIPT_STATUS_OK = 0,
  SLIPT_STATUS_NULL_POINTER = 1,
  SLIPT_STATUS_INVALID_UTF8 = 2,
  SLIPT_STATUS_CONFIG = 3,
  SLIPT_STATUS_DOMAIN = 4,
  SLIPT_STATUS_SHAPE = 5,
  SLIPT_STATUS_DEGENERATE_GEOMETRY = 6,
  SLIPT_STATUS_INFEASIBLE = 7,
  SLIPT_STATUS_NON_CONVERGENCE = 8,
  SLIPT_STATUS_TOLERANCE = 9,
  SLIPT_STATUS_CALIBRATION = 10,
  SLIPT_STATUS_JSON = 11,
  SLIPT_STATUS_IO = 12,
  SLIPT_STATUS_OUT_OF_RANGE = 13,
  SLIPT_STATUS_PANIC = 99,
} SliptStatus;

typedef enum SliptModel {
  SLIPT_MODEL_LOGNORMAL = 0,
  SLIPT_MODEL_GAUSSIAN = 1,
} SliptModel;

// Opaque channel handle.
typedef struct SliptChannel SliptChannel;

// Opaque solve report handle.
typedef struct SliptReport SliptReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *slipt_last_error_message(void);

// # Safety
// `s` must come from a `slipt_*_to_json` call and not have been freed.
void slipt_string_free(char *s);

// # Safety
// `out` must be valid for writes.
enum SliptStatus slipt_channel_reference(struct SliptChannel **out);

// Parses a channel document.
//
// # Safety
// `json` must be a NUL-terminated string and `out` valid for writes.
enum SliptStatus slipt_channel_from_json(const char *json, struct SliptChannel **out);

// Serializes the channel; free the result with [`slipt_string_free`].
//
// # Safety
// `ch` must be a live handle and `out` valid for writes.
enum SliptStatus slipt_channel_to_json(const struct SliptChannel *ch, char **out);

// # Safety
// `ch` must be null or a handle not yet freed.
void slipt_channel_free(struct SliptChannel *ch);

// # Safety
// `ch` must be a live handle.
enum SliptStatus slipt_channel_set_model(struct SliptChannel *ch, enum SliptModel model);

// Path gains of both links and the harvesting coefficients `b`, `c`.
//
// # Safety
// `ch` must be a live handle and every output pointer valid for writes.
enum SliptStatus slipt_channel_gains(const struct SliptChannel *ch,
                                     double *h1l,
                                     double *h2l,
                                     double *b,
                                     double *c);

// Harvested energy (J) at amplitude `x`.
//
// # Safety
// `ch` must be a live handle and `out` valid for writes.
enum SliptStatus slipt_eh_energy(const struct SliptChannel *ch, double x, double *out);

// `p(y|x)` of the channel's model.
//
// # Safety
// `ch` must be a live handle and `out` valid for writes.
enum SliptStatus slipt_conditional_pdf(const struct SliptChannel *ch,
                                       double y,
                                       double x,
                                       double *out);

// # Safety
// `ch` must be a live handle and both outputs valid for writes.
enum SliptStatus slipt_feasibility(const struct SliptChannel *ch,
                                   double a,
                                   double epsilon,
                                   double e_th,
                                   bool *feasible,
                                   double *max_eh);

// Mutual information (bits) of `pmf` on the `len`-point grid over `[0, a]`.
//
// # Safety
// `pmf` must point to `len` readable values; `ch` must be live and `out`
// valid for writes.
enum SliptStatus slipt_mutual_information(const struct SliptChannel *ch,
                                          double a,
                                          const double *pmf,
                                          uintptr_t len,
                                          double *out);

// Solves the capacity problem on an `n`-point grid. With `enforce_kkt` set,
// a solve whose refined-grid optimality residual exceeds `1e-3` bits fails
// with [`SliptStatus::NonConvergence`].
//
// # Safety
// `ch` must be a live handle and `out` valid for writes.
enum SliptStatus slipt_solve(const struct SliptChannel *ch,
                             double a,
                             double epsilon,
                             double e_th,
                             uintptr_t n,
                             bool enforce_kkt,
                             struct SliptReport **out);

// # Safety
// `r` must be null or a handle not yet freed.
void slipt_report_free(struct SliptReport *r);

// Capacity (bits), refined-grid residual (bits) and support size.
//
// # Safety
// `r` must be a live handle and every output valid for writes.
enum SliptStatus slipt_report_summary(const struct SliptReport *r,
                                      double *capacity_bits,
                                      double *kkt_residual,
                                      uintptr_t *support_count);

// # Safety
// `r` must be a live handle and every output valid for writes.
enum SliptStatus slipt_report_multipliers(const struct SliptReport *r,
                                          double *lambda1,
                                          double *lambda2,
                                          double *lambda3);

// Location and mass of support point `index`.
//
// # Safety
// `r` must be a live handle and both outputs valid for writes.
enum SliptStatus slipt_report_support_point(const struct SliptReport *r,
                                            uintptr_t index,
                                            double *location,
                                            double *mass);

// Copies the solved pmf into `buf`. `len` must equal the grid size; query
// it with `buf = NULL`, which writes the size to `needed`.
//
// # Safety
// `buf` must be null or point to `len` writable values; `needed` must be
// valid for writes.
enum SliptStatus slipt_report_pmf(const struct SliptReport *r,
                                  double *buf,
                                  uintptr_t len,
                                  uintptr_t *needed);

// Serializes the report; free the result with [`slipt_string_free`].
//
// # Safety
// `r` must be a live handle and `out` valid for writes.
enum SliptStatus slipt_report_to_json(const struct SliptReport *r, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLIPT_H */
