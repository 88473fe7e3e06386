#ifndef ROYALTY_H
#define ROYALTY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. `PricingInfeasible` covers parameter
 * values outside a model's domain as well as divergent perpetuities.
 */
typedef enum RoyaltyStatus {
  ROYALTY_STATUS_OK = 0,
  ROYALTY_STATUS_NULL_POINTER = 1,
  ROYALTY_STATUS_INVALID_INPUT = 2,
  ROYALTY_STATUS_PARSE_ERROR = 3,
  ROYALTY_STATUS_PRICING_INFEASIBLE = 4,
  ROYALTY_STATUS_PANIC = 5,
} RoyaltyStatus;

typedef enum RoyaltyTerm {
  ROYALTY_TERM_TEN_YEAR = 0,
  ROYALTY_TERM_THIRTY_YEAR = 1,
  ROYALTY_TERM_LIFE_OF_RIGHTS = 2,
} RoyaltyTerm;

/**
 * A parsed deal set. Release with `royalty_deals_free`.
 */
typedef struct RoyaltyDeals RoyaltyDeals;

/**
 * Model parameters. Create with `royalty_params_new` or
 * `royalty_params_from_json`; release with `royalty_params_free`.
 */
typedef struct RoyaltyParams RoyaltyParams;

typedef struct RoyaltyValuation {
  double price;
  double multiplier;
  double discount_rate;
  double expected_cashflow;
  /**
   * Remaining years, or NaN for a perpetuity.
   */
  double horizon_years;
} RoyaltyValuation;

typedef struct RoyaltyCalibration {
  double mse;
  size_t iterations;
  bool converged;
} RoyaltyCalibration;

typedef struct RoyaltyDecomposition {
  double d;
  double e;
  double f;
  double r;
} RoyaltyDecomposition;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or null if the last
 * call succeeded. Valid until the next call into this library on the same
 * thread.
 */
const char *royalty_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *royalty_version(void);

/**
 * Creates parameters for `model` (1, 2 or 3). Values a model does not use
 * must be its fixed values (`a = 1`, `k = 0`, `b = 0`).
 *
 * # Safety
 * `out` must be valid for writing one pointer.
 */
enum RoyaltyStatus royalty_params_new(uint8_t model,
                                      double r,
                                      double a,
                                      double k,
                                      double b,
                                      struct RoyaltyParams **out);

/**
 * Parses parameters from JSON such as `{"model":1,"r":0.14}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` valid for one pointer.
 */
enum RoyaltyStatus royalty_params_from_json(const char *json, struct RoyaltyParams **out);

/**
 * Writes the model number and all four parameter values.
 *
 * # Safety
 * `params` must be a live handle; each out-pointer valid for one value.
 */
enum RoyaltyStatus royalty_params_get(const struct RoyaltyParams *params,
                                      uint8_t *model,
                                      double *r,
                                      double *a,
                                      double *k,
                                      double *b);

/**
 * # Safety
 * `params` must be null or a handle not yet freed.
 */
void royalty_params_free(struct RoyaltyParams *params);

/**
 * Annuity factor over `years` at `rate`; a negative `years` means a
 * perpetuity.
 *
 * # Safety
 * `out` must be valid for one `double`.
 */
enum RoyaltyStatus royalty_annuity_factor(double rate, double years, double *out);

/**
 * # Safety
 * `params` must be a live handle; `out` valid for one `double`.
 */
enum RoyaltyStatus royalty_multiplier(const struct RoyaltyParams *params,
                                      double ltm,
                                      double lty,
                                      double age,
                                      enum RoyaltyTerm term,
                                      double *out);

/**
 * # Safety
 * `params` must be a live handle; `out` valid for one `RoyaltyValuation`.
 */
enum RoyaltyStatus royalty_price(const struct RoyaltyParams *params,
                                 double ltm,
                                 double lty,
                                 double age,
                                 enum RoyaltyTerm term,
                                 struct RoyaltyValuation *out);

/**
 * Parses a deals CSV (header `asset_id,trade_date,price,ltm,lty,age_years,term`).
 *
 * # Safety
 * `csv` must be a NUL-terminated string; `out` valid for one pointer.
 */
enum RoyaltyStatus royalty_deals_parse_csv(const char *csv, struct RoyaltyDeals **out);

/**
 * Number of deals in the set, or 0 for a null handle.
 *
 * # Safety
 * `deals` must be null or a live handle.
 */
size_t royalty_deals_len(const struct RoyaltyDeals *deals);

/**
 * # Safety
 * `deals` must be null or a handle not yet freed.
 */
void royalty_deals_free(struct RoyaltyDeals *deals);

/**
 * Fits `model` with default bounds and tolerance. `max_iterations` of 0
 * keeps the default budget. Running out of iterations is not an error:
 * check `summary.converged`.
 *
 * # Safety
 * `deals` must be a live handle; `out_params` valid for one pointer and
 * `summary` for one `RoyaltyCalibration`.
 */
enum RoyaltyStatus royalty_calibrate(const struct RoyaltyDeals *deals,
                                     uint8_t model,
                                     size_t max_iterations,
                                     struct RoyaltyParams **out_params,
                                     struct RoyaltyCalibration *summary);

/**
 * `buyer_fee + seller_commission * sell_price`.
 *
 * # Safety
 * `out` must be valid for one `double`.
 */
enum RoyaltyStatus royalty_transaction_cost(double buyer_fee,
                                            double seller_commission,
                                            double sell_price,
                                            double *out);

/**
 * Splits one holding period's flows into dividend yield, capital gain,
 * cost drag and total return.
 *
 * # Safety
 * `out` must be valid for one `RoyaltyDecomposition`.
 */
enum RoyaltyStatus royalty_decompose(double buy_price,
                                     double cash,
                                     double sell_price,
                                     double cost,
                                     struct RoyaltyDecomposition *out);

/**
 * Per-year rate compounding to `total_return` over `years`.
 *
 * # Safety
 * `out` must be valid for one `double`.
 */
enum RoyaltyStatus royalty_annualize(double total_return, double years, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROYALTY_H */
