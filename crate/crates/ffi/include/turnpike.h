#ifndef TURNPIKE_H
#define TURNPIKE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TpStatus {
  TP_STATUS_OK = 0,
  TP_STATUS_NULL_POINTER = 1,
  /**
   * Bad input: parameters, utility specs, table ids, wealth or horizon.
   */
  TP_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Root bracketing, quadrature or overflow failure.
   */
  TP_STATUS_NUMERICAL = 3,
  TP_STATUS_PANIC = 4,
} TpStatus;

typedef enum TpRegimeKind {
  TP_REGIME_KIND_TURNPIKE = 0,
  TP_REGIME_KIND_NON_TURNPIKE = 1,
  TP_REGIME_KIND_BOUNDARY = 2,
} TpRegimeKind;

typedef enum TpLimitKind {
  TP_LIMIT_KIND_MERTON_LINEAR = 0,
  TP_LIMIT_KIND_NONLINEAR_FIXED_POINT = 1,
} TpLimitKind;

typedef enum TpMethod {
  /**
   * Closed forms for power mixtures, quadrature otherwise.
   */
  TP_METHOD_AUTO = 0,
  TP_METHOD_QUADRATURE = 1,
  TP_METHOD_CLOSED_FORM = 2,
} TpMethod;

typedef struct TpDual TpDual;

typedef struct TpMarket TpMarket;

typedef struct TpProblem TpProblem;

typedef struct TpDerived {
  double r;
  double sigma;
  double theta;
  double delta;
  double alpha;
  double a;
  double beta;
  double q_star;
  double p_star;
} TpDerived;

typedef struct TpRegime {
  enum TpRegimeKind kind;
  double q_min;
} TpRegime;

typedef struct TpStrategyPoint {
  double x;
  double t;
  double y;
  double amount;
  double fraction;
  double consumption;
} TpStrategyPoint;

typedef struct TpLimit {
  enum TpRegimeKind regime;
  enum TpLimitKind kind;
  double x;
  double q_eff;
  double merton_pi;
  /**
   * NaN for linear limits.
   */
  double shadow_price;
  double amount;
  double fraction;
  /**
   * Limiting consumption level; NaN when consumption only converges
   * after rescaling, or when there is none.
   */
  double consumption;
} TpLimit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Market from the Sharpe ratio `theta`.
 *
 * # Safety
 * `out` must be null or point to writable storage for a handle.
 */
enum TpStatus tp_market_new(double r,
                            double sigma,
                            double theta,
                            double delta,
                            struct TpMarket **out);

/**
 * Market from the drift `mu`.
 *
 * # Safety
 * As [`tp_market_new`].
 */
enum TpStatus tp_market_new_mu(double r,
                               double sigma,
                               double mu,
                               double delta,
                               struct TpMarket **out);

/**
 * # Safety
 * `market` must be null or a handle from `tp_market_new*` not yet freed.
 */
void tp_market_free(struct TpMarket *market);

/**
 * # Safety
 * `market` must be a live handle; `out` writable.
 */
enum TpStatus tp_market_derived(const struct TpMarket *market, struct TpDerived *out);

/**
 * `λ(q)` for `q ≤ 1`.
 *
 * # Safety
 * `market` must be a live handle; `out` writable.
 */
enum TpStatus tp_market_lambda(const struct TpMarket *market, double q, double *out);

/**
 * # Safety
 * `market` must be a live handle; `out` writable.
 */
enum TpStatus tp_classify(const struct TpMarket *market,
                          double q1,
                          double q2,
                          struct TpRegime *out);

/**
 * Parses `power:q=<v>[,k=<v>]`, `nonhara:p=<v>` or `zero`.
 *
 * # Safety
 * `spec` must be null or a NUL-terminated string; `out` writable.
 */
enum TpStatus tp_dual_parse(const char *spec, struct TpDual **out);

/**
 * # Safety
 * `dual` must be null or a handle from `tp_dual_parse` not yet freed.
 */
void tp_dual_free(struct TpDual *dual);

/**
 * `y` with `−V'(y) = x`.
 *
 * # Safety
 * `dual` must be a live handle; `out` writable.
 */
enum TpStatus tp_dual_marginal_inverse(const struct TpDual *dual, double x, double *out);

/**
 * Problem with terminal dual `terminal` and consumption dual
 * `consumption`. The problem keeps its own references, so the inputs may
 * be freed afterwards.
 *
 * # Safety
 * All handles must be live; `out` writable.
 */
enum TpStatus tp_problem_new(const struct TpDual *terminal,
                             const struct TpDual *consumption,
                             const struct TpMarket *market,
                             struct TpProblem **out);

/**
 * # Safety
 * `problem` must be null or a handle from `tp_problem_new` not yet freed.
 */
void tp_problem_free(struct TpProblem *problem);

/**
 * Optimal strategy at wealth `x` with `t` years to go; `method` is one of
 * the `TpMethod` values.
 *
 * # Safety
 * `problem` must be a live handle; `out` writable.
 */
enum TpStatus tp_optimal_strategy(const struct TpProblem *problem,
                                  double x,
                                  double t,
                                  uint32_t method,
                                  struct TpStrategyPoint *out);

/**
 * Limiting strategy as the horizon grows.
 *
 * # Safety
 * `problem` must be a live handle; `out` writable.
 */
enum TpStatus tp_limit_strategy(const struct TpProblem *problem, double x, struct TpLimit *out);

/**
 * Reference table `id` (1 to 5) as CSV with `precision` decimals. Release
 * the string with `tp_string_free`.
 *
 * # Safety
 * `out` must be writable.
 */
enum TpStatus tp_table_csv(uint32_t id, uint32_t precision, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library not yet freed.
 */
void tp_string_free(char *s);

/**
 * Message for the last failed call on this thread, empty after a success.
 * Valid until the next call into the library from the same thread.
 */
const char *tp_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TURNPIKE_H */
