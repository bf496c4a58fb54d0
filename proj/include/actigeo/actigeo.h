#ifndef ACTIGEO_H
#define ACTIGEO_H

/*
 * C interface to the actigeo library: diffeomorphic matching of daily
 * activity curves, geodesic shooting, kernel curve dissimilarity, and the
 * config-driven analysis pipeline.
 *
 * Conventions:
 *   - every function returns AG_OK (0) on success, AG_ERR_RUNTIME (1) for
 *     computation failures, AG_ERR_VALIDATION (2) for bad inputs;
 *   - ag_last_error() returns a thread-local message for the last failure;
 *   - point arrays are interleaved x0,y0,x1,y1,... of length 2*n.
 */

#include <stddef.h>

#if defined(_WIN32)
#define AG_API __declspec(dllexport)
#else
#define AG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define AG_OK 0
#define AG_ERR_RUNTIME 1
#define AG_ERR_VALIDATION 2

AG_API const char* ag_version(void);
AG_API const char* ag_last_error(void);

/* ---- pipeline ---------------------------------------------------------- */

typedef struct ag_pipeline ag_pipeline;

/* Loads and validates an INI config file. */
AG_API int ag_pipeline_create(const char* config_path, ag_pipeline** out);

/* Dotted overrides, e.g. ("run.seed", "42"), ("run.jobs", "4"),
 * ("io.out_dir", "results"). */
AG_API int ag_pipeline_override(ag_pipeline* p, const char* key,
                                const char* value);

/* stage: preprocess | match | fpca | regress | simulate | render | all */
AG_API int ag_pipeline_run(ag_pipeline* p, const char* stage);

/* JSON summary of the last completed stage; owned by the pipeline. */
AG_API const char* ag_pipeline_summary(const ag_pipeline* p);

AG_API void ag_pipeline_destroy(ag_pipeline* p);

/* ---- curve matching ----------------------------------------------------- */

typedef struct ag_match ag_match;

/* Estimates the minimal-energy deformation taking the source curve to the
 * target curve. Curves are polylines in the normalized [-1,1]^2 frame with
 * strictly increasing x. options_json may be NULL or a JSON object with any
 * of: sigma_v, sigma_w, gamma_v, gamma_w, n_steps, control_stride,
 * max_iters, grad_tol. */
AG_API int ag_match_curves(const double* source_xy, size_t source_n,
                           const double* target_xy, size_t target_n,
                           const char* options_json, ag_match** out);

AG_API int ag_match_size(const ag_match* m, size_t* n_control);

/* Both arrays hold 2*n_control doubles. */
AG_API int ag_match_momenta(const ag_match* m, double* control_xy,
                            double* momenta_xy);

AG_API int ag_match_stats(const ag_match* m, double* objective,
                          double* attachment, double* energy, int* converged,
                          int* iterations);

AG_API void ag_match_destroy(ag_match* m);

/* ---- geodesic shooting --------------------------------------------------- */

/* Flows n_points passive points through the geodesic determined by the
 * control points and initial momenta; out_xy holds 2*n_points doubles. */
AG_API int ag_shoot_points(const double* control_xy, const double* momenta_xy,
                           size_t n_control, const double* points_xy,
                           size_t n_points, int n_steps, double sigma_v,
                           double* out_xy);

AG_API int ag_hamiltonian(const double* control_xy, const double* momenta_xy,
                          size_t n_control, double sigma_v, double* out);

/* ---- curve dissimilarity -------------------------------------------------- */

/* Kernel current distance (squared) between two polylines. */
AG_API int ag_curve_distance(const double* a_xy, size_t a_n,
                             const double* b_xy, size_t b_n, double sigma_w,
                             double* out);

#ifdef __cplusplus
}
#endif

#endif /* ACTIGEO_H */
