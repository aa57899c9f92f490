/*
 * C interface to the CEMA simulator and dispatch oracle.
 *
 * Objects are opaque handles owned by the caller and released with the
 * matching *_free function. Every fallible call returns a cema_status; on
 * failure cema_last_error() describes what went wrong (per thread, valid until
 * the next failing call on that thread). Strings handed out through char**
 * parameters are heap-allocated and released with cema_string_free.
 */
#ifndef CEMA_CEMA_H
#define CEMA_CEMA_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(CEMA_BUILDING_LIBRARY)
#    define CEMA_API __declspec(dllexport)
#  else
#    define CEMA_API __declspec(dllimport)
#  endif
#else
#  define CEMA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cema_status {
  CEMA_OK = 0,
  CEMA_ERR_INVALID_ARGUMENT = 1,
  CEMA_ERR_INFEASIBLE = 2,
  CEMA_ERR_SOLVER = 3,
  CEMA_ERR_IO = 4,
  CEMA_ERR_INTERNAL = 5
} cema_status;

typedef enum cema_variant {
  CEMA_VARIANT_ORIGINAL = 0,
  CEMA_VARIANT_CORRECTED = 1
} cema_variant;

typedef enum cema_termination {
  CEMA_TERMINATED_BY_TOLERANCE = 0,
  CEMA_TERMINATED_BY_MAX_ITERS = 1,
  CEMA_TERMINATED_DIVERGED = 2
} cema_termination;

typedef enum cema_counterexample_outcome {
  CEMA_CONTRADICTION_EXHIBITED = 0,
  CEMA_CONTRADICTION_NOT_CONVERGED = 1,
  CEMA_CONTRADICTION_NONE = 2
} cema_counterexample_outcome;

typedef struct cema_scenario cema_scenario;
typedef struct cema_run cema_run;
typedef struct cema_kkt_report cema_kkt_report;
typedef struct cema_counterexample cema_counterexample;

typedef struct cema_solution_info {
  double lambda;
  double objective;
  /* Net supply minus demand at the returned price. */
  double balance_residual;
  /* KKT max residual of the returned point, checked at tolerance 1e-6. */
  double kkt_max_residual;
} cema_solution_info;

CEMA_API const char *cema_version(void);
CEMA_API const char *cema_last_error(void);
CEMA_API void cema_string_free(char *s);

/* ---- scenarios ---- */

/* `path_or_preset` is a JSON file path or the built-in name "table1". */
CEMA_API cema_status cema_scenario_load(const char *path_or_preset, cema_scenario **out);
CEMA_API cema_status cema_scenario_parse(const char *json_text, cema_scenario **out);
CEMA_API cema_status cema_scenario_generate(uint64_t seed, size_t generators, size_t consumers,
                                            cema_scenario **out);
CEMA_API void cema_scenario_free(cema_scenario *s);

CEMA_API cema_status cema_scenario_to_json(const cema_scenario *s, char **json_out);
CEMA_API size_t cema_scenario_node_count(const cema_scenario *s);
CEMA_API size_t cema_scenario_generator_count(const cema_scenario *s);

/* Writes the number of violations to *count and, when messages is non-NULL,
 * one violation per line ("node <i>: <message>" or "<message>"). */
CEMA_API cema_status cema_scenario_validate(const cema_scenario *s, size_t *count,
                                            char **messages);
CEMA_API cema_status cema_scenario_feasibility(const cema_scenario *s, int *holds,
                                               double *slack);

CEMA_API cema_status cema_scenario_set_eta(cema_scenario *s, double eta);
CEMA_API cema_status cema_scenario_set_eps_m(cema_scenario *s, double eps_m);
CEMA_API cema_status cema_scenario_set_eps_l(cema_scenario *s, double eps_l);
CEMA_API cema_status cema_scenario_set_max_iters(cema_scenario *s, size_t max_iters);

/* ---- distributed iteration ---- */

CEMA_API cema_status cema_run_execute(const cema_scenario *s, cema_variant variant,
                                      size_t trace_stride, cema_run **out);
CEMA_API void cema_run_free(cema_run *r);
CEMA_API cema_termination cema_run_termination(const cema_run *r);
CEMA_API size_t cema_run_rounds(const cema_run *r);
CEMA_API double cema_run_max_conservation_error(const cema_run *r);
/* Each output array (any may be NULL) must hold n = node count entries. */
CEMA_API cema_status cema_run_final_state(const cema_run *r, double *lambda, double *P,
                                          double *xi, size_t n);
/* Per-node trace CSV and per-round summary CSV. Either path may be NULL. */
CEMA_API cema_status cema_run_write_trace(const cema_run *r, const char *trace_path,
                                          const char *rounds_path);
/* Either output may be NULL. Text includes the implied-price diagnostic. */
CEMA_API cema_status cema_run_summary(const cema_run *r, char **json_out, char **text_out);
CEMA_API int cema_run_prices_disagree(const cema_run *r);

/* ---- centralized oracle ---- */

/* P_out must hold n = node count entries. */
CEMA_API cema_status cema_solve(const cema_scenario *s, double tol, double *P_out, size_t n,
                                cema_solution_info *info);
CEMA_API cema_status cema_kkt_check(const cema_scenario *s, const double *P, size_t n,
                                    double lambda, double tol, cema_kkt_report **out);
CEMA_API void cema_kkt_free(cema_kkt_report *r);
CEMA_API double cema_kkt_max_residual(const cema_kkt_report *r);
CEMA_API int cema_kkt_certified(const cema_kkt_report *r);
CEMA_API cema_status cema_kkt_to_json(const cema_kkt_report *r, char **json_out);

/* gen_P and out hold one entry per generator. */
CEMA_API cema_status cema_implied_prices(const cema_scenario *s, const double *gen_P,
                                         size_t n_gen, cema_variant variant, double *out);

/* ---- counterexample ---- */

/* reference_gen_P may be NULL; otherwise it holds n_ref = generator count
 * powers at which raw implied prices are also reported. */
CEMA_API cema_status cema_counterexample_analyze(const cema_scenario *s,
                                                 const double *reference_gen_P, size_t n_ref,
                                                 cema_counterexample **out);
CEMA_API void cema_counterexample_free(cema_counterexample *c);
CEMA_API cema_counterexample_outcome cema_counterexample_result(const cema_counterexample *c);
CEMA_API cema_status cema_counterexample_report(const cema_counterexample *c, char **json_out,
                                                char **text_out);

/* Published generator dispatch of the table1 case; returns the number of
 * entries (2) and copies up to n of them into out. */
CEMA_API size_t cema_table1_reference_dispatch(double *out, size_t n);

#ifdef __cplusplus
}
#endif

#endif /* CEMA_CEMA_H */
