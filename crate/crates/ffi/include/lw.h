#ifndef LW_CAPI_H
#define LW_CAPI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes mirroring the CLI's exit codes.
 */
typedef enum LwStatus {
  Ok = 0,
  /**
   * A security violation or type error: the input was understood but
   * rejected.
   */
  Rejected = 1,
  /**
   * A null pointer, bad UTF-8, or other invalid argument.
   */
  InvalidArgument = 2,
  /**
   * The program text does not parse.
   */
  ParseError = 3,
  /**
   * The configuration or state JSON is invalid.
   */
  ConfigError = 4,
} LwStatus;

/**
 * Opaque security configuration handle.
 */
typedef struct LwConfig LwConfig;

/**
 * Opaque parsed-expression handle.
 */
typedef struct LwExpr LwExpr;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Releases a string returned by any `lw_*` function.
 */
void lw_string_free(char *s);

/**
 * Creates a configuration from its JSON form
 * (`{"actors": [...], "locks": [...], "lock_policies": {...}}`).
 */
enum LwStatus lw_config_new(const char *json, struct LwConfig **out);

void lw_config_free(struct LwConfig *cfg);

/**
 * Parses a program (runtime forms such as `#0` are allowed).
 */
enum LwStatus lw_expr_parse(const struct LwConfig *cfg, const char *source, struct LwExpr **out);

void lw_expr_free(struct LwExpr *e);

/**
 * Prints an expression back as canonical concrete syntax.
 */
enum LwStatus lw_expr_pretty(const struct LwExpr *e, char **out);

/**
 * Typechecks an expression; on success `out_type` receives the type in
 * concrete syntax, on rejection it receives the error message.
 */
enum LwStatus lw_typecheck(const struct LwConfig *cfg,
                           const struct LwExpr *e,
                           const char *state_json,
                           const char *locks_csv,
                           char **out_type);

/**
 * Runs an expression for at most `fuel` steps; `out_trace` receives the
 * observation trace as JSON.
 */
enum LwStatus lw_run(const struct LwConfig *cfg,
                     const struct LwExpr *e,
                     const char *state_json,
                     const char *locks_csv,
                     uint64_t fuel,
                     char **out_trace);

/**
 * Bounded whole-program security check. `result_type` is the type the
 * program is claimed at (concrete syntax); `nat_domain_csv` bounds the
 * enumerated values (e.g. `"0,1"`). `out_report` receives the Report JSON.
 * Returns `Rejected` when the report contains a violation.
 */
enum LwStatus lw_check(const struct LwConfig *cfg,
                       const struct LwExpr *e,
                       const char *state_json,
                       const char *locks_csv,
                       const char *result_type,
                       const char *nat_domain_csv,
                       uint64_t fuel,
                       char **out_report);

/**
 * Library version as a static string; do not free.
 */
const char *lw_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LW_CAPI_H */
