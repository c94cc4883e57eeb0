#ifndef RELSEC_H
#define RELSEC_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Mode codes accepted in `modes` arrays.
#define RELSEC_MODE_DF 0

#define RELSEC_MODE_NF 1

typedef enum RelsecStatus {
  RELSEC_STATUS_OK = 0,
  RELSEC_STATUS_NULL_POINTER = 1,
  RELSEC_STATUS_DOMAIN = 2,
  RELSEC_STATUS_SHAPE = 3,
  RELSEC_STATUS_INFEASIBLE = 4,
  RELSEC_STATUS_UNSUPPORTED = 5,
  RELSEC_STATUS_INVALID_MODE = 6,
  RELSEC_STATUS_PANIC = 7,
  RELSEC_STATUS_OTHER = 8,
} RelsecStatus;

// Opaque parallel channel with its power budgets.
typedef struct RelsecProblem RelsecProblem;

typedef struct RelsecOptimizerConfig {
  uint32_t restarts;
  uint32_t max_iters;
  double step_init;
  double tol;
  uint64_t seed;
} RelsecOptimizerConfig;

// Noise variances and relay gain ratios of one subchannel. Use
// `INFINITY` for `sigma1_sq` when the relay does not hear the source.
typedef struct RelsecSubchannel {
  double sigma_sq;
  double sigma1_sq;
  double sigma2_sq;
  double rho1;
  double rho2;
} RelsecSubchannel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *relsec_version(void);

// Message of the last failed call on this thread, or an empty string.
// The pointer stays valid until the next `relsec_*` call on this thread.
const char *relsec_last_error_message(void);

struct RelsecOptimizerConfig relsec_optimizer_config_default(void);

// `C(x) = 1/2 log2(1 + x)`, doubled when `complex` is true.
//
// # Safety
// `out` must be null or valid for a write of one `double`.
enum RelsecStatus relsec_cap(double x, bool complex, double *out);

// Creates an empty problem with the given sum-power budgets.
//
// # Safety
// `out` must be valid for a write of one pointer. The handle must be
// released with [`relsec_problem_free`].
enum RelsecStatus relsec_problem_new(double p1_total,
                                     double p2_total,
                                     bool complex,
                                     struct RelsecProblem **out);

// Releases a problem. Null is ignored.
//
// # Safety
// `problem` must be null or a handle from [`relsec_problem_new`] that has
// not been freed.
void relsec_problem_free(struct RelsecProblem *problem);

// Appends a subchannel after validating it.
//
// # Safety
// `problem` must be a live handle and `sub` valid for one read.
enum RelsecStatus relsec_problem_add_subchannel(struct RelsecProblem *problem,
                                                const struct RelsecSubchannel *sub);

// Number of subchannels, or 0 for a null handle.
//
// # Safety
// `problem` must be null or a live handle.
uintptr_t relsec_problem_len(const struct RelsecProblem *problem);

// Condensed lower bound at a fixed allocation. Arrays have one entry per
// subchannel; `alpha` is read only on DF subchannels but must be present.
//
// # Safety
// `problem` must be a live handle; `modes`, `p1`, `p2`, `alpha` must each be
// valid for `relsec_problem_len(problem)` reads; `out` for one write.
enum RelsecStatus relsec_lower_bound(const struct RelsecProblem *problem,
                                     const uint8_t *modes,
                                     const double *p1,
                                     const double *p2,
                                     const double *alpha,
                                     double *out);

// Upper bound at a fixed allocation.
//
// # Safety
// As [`relsec_lower_bound`], with `psi` in place of `modes` and `alpha`.
enum RelsecStatus relsec_upper_bound(const struct RelsecProblem *problem,
                                     const double *p1,
                                     const double *p2,
                                     const double *psi,
                                     double *out);

// Maximizes the lower bound under a fixed partition. `config` may be null
// for defaults. Any of `out_p1`, `out_p2`, `out_alpha` may be null.
//
// # Safety
// `problem` must be a live handle; `modes` valid for `len` reads; non-null
// output arrays valid for `len` writes; `out_rate` for one write.
enum RelsecStatus relsec_optimize_lower(const struct RelsecProblem *problem,
                                        const uint8_t *modes,
                                        const struct RelsecOptimizerConfig *config,
                                        double *out_rate,
                                        double *out_p1,
                                        double *out_p2,
                                        double *out_alpha);

// Maximizes the upper bound over powers and correlations.
//
// # Safety
// As [`relsec_optimize_lower`] without `modes`.
enum RelsecStatus relsec_optimize_upper(const struct RelsecProblem *problem,
                                        const struct RelsecOptimizerConfig *config,
                                        double *out_rate,
                                        double *out_p1,
                                        double *out_p2,
                                        double *out_psi);

// Deaf-relay capacity expression and the optimized all-NF lower bound.
//
// # Safety
// `problem` must be a live handle; `out_capacity` valid for one write;
// `out_all_nf_lower` null or valid for one write.
enum RelsecStatus relsec_optimize_deaf_relay(const struct RelsecProblem *problem,
                                             const struct RelsecOptimizerConfig *config,
                                             double *out_capacity,
                                             double *out_all_nf_lower);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELSEC_H */
