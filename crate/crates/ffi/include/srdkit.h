/* srdkit C API: Gaussian sequential rate-distortion toolkit. */

#ifndef SRDKIT_H
#define SRDKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes mirroring the CLI exit codes.
typedef enum SrdStatus {
  SRD_STATUS_OK = 0,
  SRD_STATUS_INVALID_ARGUMENT = 1,
  SRD_STATUS_PARSE_ERROR = 2,
  SRD_STATUS_INFEASIBLE = 3,
  SRD_STATUS_SOLVER_FAILURE = 4,
  SRD_STATUS_INTERNAL = 5,
} SrdStatus;

// Opaque synthesized design.
typedef struct SrdDesign SrdDesign;

// Opaque parsed model file.
typedef struct SrdModel SrdModel;

// Opaque solved schedule (with embedded design).
typedef struct SrdSchedule SrdSchedule;

// Solver parameters; obtain defaults from `srd_solver_config_default`.
typedef struct SrdSolverConfig {
  // Central-path neighborhood size, in (0, 1).
  double gamma;
  // Barrier reduction rate, in (0, 1).
  double sigma;
  // Relative duality-gap tolerance.
  double eps;
  uint64_t max_iters;
  // Relative eigenvalue tolerance for sensor rank decisions.
  double rank_tol;
} SrdSolverConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Default solver configuration.
struct SrdSolverConfig srd_solver_config_default(void);

// Copies the last error message into `buf` (NUL-terminated, truncated to
// `cap`); returns the full message length in bytes excluding the NUL.
size_t srd_last_error_message(char *buf, size_t cap);

// Parses a model-file JSON document into an opaque handle.
enum SrdStatus srd_model_parse_json(const char *json, struct SrdModel **out);

void srd_model_free(struct SrdModel *model);

// State dimension of a parsed model.
int64_t srd_model_state_dim(const struct SrdModel *model);

// Horizon length, or -1 for stationary models.
int64_t srd_model_horizon(const struct SrdModel *model);

// Solves the stationary SRD problem of a stationary model at distortion
// bound `d`, writing the rate in nats.
enum SrdStatus srd_stationary_rate(const struct SrdModel *model,
                                   double d,
                                   const struct SrdSolverConfig *config,
                                   double *out_rate_nats);

// Solves the finite-horizon problem of a model, producing a schedule handle.
enum SrdStatus srd_schedule_compute(const struct SrdModel *model,
                                    const struct SrdSolverConfig *config,
                                    struct SrdSchedule **out);

void srd_schedule_free(struct SrdSchedule *schedule);

// Total directed-information rate of a schedule in nats (NaN on null).
double srd_schedule_total_rate_nats(const struct SrdSchedule *schedule);

int64_t srd_schedule_horizon(const struct SrdSchedule *schedule);

// Serializes a schedule (with embedded design) to JSON; free the string
// with `srd_string_free`.
enum SrdStatus srd_schedule_to_json(const struct SrdSchedule *schedule, char **out);

// Re-synthesizes the sensor design from a schedule.
enum SrdStatus srd_design_synthesize(const struct SrdModel *model,
                                     const struct SrdSchedule *schedule,
                                     const struct SrdSolverConfig *config,
                                     struct SrdDesign **out);

void srd_design_free(struct SrdDesign *design);

// Sensor output dimension at step `t` (0-based), or -1 out of range.
int64_t srd_design_rank(const struct SrdDesign *design, uint64_t t);

enum SrdStatus srd_design_to_json(const struct SrdDesign *design, char **out);

// Monte Carlo validation of a design; returns the simulation report JSON.
enum SrdStatus srd_simulate_json(const struct SrdModel *model,
                                 const struct SrdDesign *design,
                                 uint64_t paths,
                                 uint64_t seed,
                                 char **out);

// Frees a string handed out by any `*_to_json` function.
void srd_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SRDKIT_H */
