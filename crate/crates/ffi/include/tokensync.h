#ifndef TOKENSYNC_H
#define TOKENSYNC_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

enum TsyncStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  TSYNC_STATUS_OK = 0,
  /**
   * A checked property does not hold (command calls only).
   */
  TSYNC_STATUS_PROPERTY_VIOLATED = 1,
  TSYNC_STATUS_INPUT_ERROR = 2,
  TSYNC_STATUS_RESOURCE_BOUND = 3,
  TSYNC_STATUS_NULL_POINTER = -1,
  TSYNC_STATUS_PANIC = -2,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum TsyncStatus TsyncStatus;
#else
typedef int32_t TsyncStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

typedef enum TsyncMethod {
  TSYNC_METHOD_TRANSFER,
  TSYNC_METHOD_TRANSFER_FROM,
  TSYNC_METHOD_APPROVE,
  TSYNC_METHOD_BALANCE_OF,
  TSYNC_METHOD_ALLOWANCE,
  TSYNC_METHOD_TOTAL_SUPPLY,
} TsyncMethod;

typedef enum TsyncValueKind {
  TSYNC_VALUE_KIND_BOTTOM,
  TSYNC_VALUE_KIND_BOOL,
  TSYNC_VALUE_KIND_NAT,
} TsyncValueKind;

/**
 * Opaque token state. Account `i` is owned by process `i`.
 */
typedef struct TsyncToken TsyncToken;

/**
 * One token operation. Unused fields are ignored.
 *
 * | method        | account  | target   | value |
 * |---------------|----------|----------|-------|
 * | transfer      |          | to       | value |
 * | transferFrom  | from     | to       | value |
 * | approve       |          | spender  | value |
 * | balanceOf     | account  |          |       |
 * | allowance     | account  | spender  |       |
 */
typedef struct TsyncOp {
  enum TsyncMethod method;
  size_t caller;
  size_t account;
  size_t target;
  uint64_t value;
} TsyncOp;

/**
 * A response. Booleans are 0 or 1 in `value`.
 */
typedef struct TsyncValue {
  enum TsyncValueKind kind;
  uint64_t value;
} TsyncValue;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Description of the last failure on this thread, or null. Valid until
 * the next call into this library on the same thread.
 */
const char *tsync_last_error(void);

/**
 * Creates a token with `n` accounts, the given balances and no allowances.
 *
 * # Safety
 * `balances` must point to `n` readable values; `out` must be writable.
 */
TsyncStatus tsync_token_new(const uint64_t *balances, size_t n, struct TsyncToken **out);

/**
 * # Safety
 * `t` must come from [`tsync_token_new`] or [`tsync_token_clone`] and not
 * have been freed. Null is ignored.
 */
void tsync_token_free(struct TsyncToken *t);

/**
 * # Safety
 * `t` must be a live handle; `out` must be writable.
 */
TsyncStatus tsync_token_clone(const struct TsyncToken *t, struct TsyncToken **out);

/**
 * Applies `op` on behalf of `op.caller`. A refused operation is not an
 * error: the response is false and the state is unchanged.
 *
 * # Safety
 * `t` must be a live handle; `op` readable; `out` writable or null.
 */
TsyncStatus tsync_token_apply(struct TsyncToken *t,
                              const struct TsyncOp *op,
                              struct TsyncValue *out);

/**
 * # Safety
 * `t` must be a live handle; `out` writable.
 */
TsyncStatus tsync_token_accounts(const struct TsyncToken *t, size_t *out);

/**
 * # Safety
 * `t` must be a live handle; `out` writable.
 */
TsyncStatus tsync_token_balance(const struct TsyncToken *t, size_t account, uint64_t *out);

/**
 * # Safety
 * `t` must be a live handle; `out` writable.
 */
TsyncStatus tsync_token_allowance(const struct TsyncToken *t,
                                  size_t account,
                                  size_t spender,
                                  uint64_t *out);

/**
 * The largest enabled-spender set over all accounts.
 *
 * # Safety
 * `t` must be a live handle; `out` writable.
 */
TsyncStatus tsync_token_class_k(const struct TsyncToken *t, size_t *out);

/**
 * Enabled spenders of `account` as a bitmask over process indices.
 *
 * # Safety
 * `t` must be a live handle; `out` writable.
 */
TsyncStatus tsync_token_enabled_spenders(const struct TsyncToken *t, size_t account, uint64_t *out);

/**
 * # Safety
 * `t` must be a live handle; `out` writable.
 */
TsyncStatus tsync_token_unique_transfer(const struct TsyncToken *t, size_t account, bool *out);

/**
 * Runs one command given as JSON, e.g.
 * `{"command": "replay-example"}`, and stores the JSON outcome
 * (`exit`, `report`, `text`) in `out`. The status mirrors the command's
 * exit code. Free the string with [`tsync_string_free`].
 *
 * # Safety
 * `request` must be a nul-terminated string; `out` writable.
 */
TsyncStatus tsync_run_command(const char *request, char **out);

/**
 * # Safety
 * `s` must come from this library and not have been freed. Null is
 * ignored.
 */
void tsync_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOKENSYNC_H */
