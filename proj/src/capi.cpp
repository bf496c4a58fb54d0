#include "actigeo/actigeo.h"

#include "currents.hpp"
#include "matching.hpp"
#include "pipeline.hpp"
#include "shooting.hpp"

#include <cstring>
#include <string>

namespace {

thread_local std::string g_last_error;

int set_error(const actigeo::Error& e) {
    g_last_error = e.what();
    return e.kind() == actigeo::ErrorKind::validation ? AG_ERR_VALIDATION
                                                      : AG_ERR_RUNTIME;
}

int set_error(const std::exception& e) {
    g_last_error = e.what();
    return AG_ERR_RUNTIME;
}

template <typename F>
int guarded(F&& f) {
    try {
        f();
        return AG_OK;
    } catch (const actigeo::Error& e) {
        return set_error(e);
    } catch (const std::exception& e) {
        return set_error(e);
    } catch (...) {
        g_last_error = "unknown error";
        return AG_ERR_RUNTIME;
    }
}

int arg_error(const char* what) {
    g_last_error = what;
    return AG_ERR_VALIDATION;
}

actigeo::Points from_xy(const double* xy, size_t n) {
    actigeo::Points p(static_cast<Eigen::Index>(n), 2);
    for (size_t i = 0; i < n; ++i) {
        p(static_cast<Eigen::Index>(i), 0) = xy[2 * i];
        p(static_cast<Eigen::Index>(i), 1) = xy[2 * i + 1];
    }
    return p;
}

void to_xy(const actigeo::Points& p, double* xy) {
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        xy[2 * i] = p(i, 0);
        xy[2 * i + 1] = p(i, 1);
    }
}

}  // namespace

struct ag_pipeline {
    actigeo::pipeline::PipelineConfig cfg;
    std::string summary;
};

struct ag_match {
    actigeo::MatchResult result;
};

extern "C" {

const char* ag_version(void) { return actigeo::pipeline::kToolVersion; }

const char* ag_last_error(void) { return g_last_error.c_str(); }

int ag_pipeline_create(const char* config_path, ag_pipeline** out) {
    if (!config_path || !out) return arg_error("null argument");
    *out = nullptr;
    return guarded([&] {
        auto p = std::make_unique<ag_pipeline>();
        p->cfg = actigeo::pipeline::load_config(config_path);
        *out = p.release();
    });
}

int ag_pipeline_override(ag_pipeline* p, const char* key, const char* value) {
    if (!p || !key || !value) return arg_error("null argument");
    return guarded([&] { actigeo::pipeline::apply_override(p->cfg, key, value); });
}

int ag_pipeline_run(ag_pipeline* p, const char* stage) {
    if (!p || !stage) return arg_error("null argument");
    return guarded([&] {
        p->summary = actigeo::pipeline::run_stage(p->cfg, stage).dump(2);
    });
}

const char* ag_pipeline_summary(const ag_pipeline* p) {
    return p ? p->summary.c_str() : "";
}

void ag_pipeline_destroy(ag_pipeline* p) { delete p; }

int ag_match_curves(const double* source_xy, size_t source_n,
                    const double* target_xy, size_t target_n,
                    const char* options_json, ag_match** out) {
    if (!source_xy || !target_xy || !out) return arg_error("null argument");
    *out = nullptr;
    return guarded([&] {
        actigeo::MatchConfig cfg;
        if (options_json && std::strlen(options_json) > 0) {
            cfg = actigeo::match_config_from_json(
                nlohmann::json::parse(options_json));
        }
        const actigeo::Curve source =
            actigeo::make_curve(from_xy(source_xy, source_n));
        const actigeo::Curve target =
            actigeo::make_curve(from_xy(target_xy, target_n));
        auto m = std::make_unique<ag_match>();
        m->result = actigeo::match_curves(source, target, cfg);
        *out = m.release();
    });
}

int ag_match_size(const ag_match* m, size_t* n_control) {
    if (!m || !n_control) return arg_error("null argument");
    *n_control = static_cast<size_t>(m->result.control_points.rows());
    return AG_OK;
}

int ag_match_momenta(const ag_match* m, double* control_xy,
                     double* momenta_xy) {
    if (!m || !control_xy || !momenta_xy) return arg_error("null argument");
    to_xy(m->result.control_points, control_xy);
    to_xy(m->result.momenta, momenta_xy);
    return AG_OK;
}

int ag_match_stats(const ag_match* m, double* objective, double* attachment,
                   double* energy, int* converged, int* iterations) {
    if (!m) return arg_error("null argument");
    if (objective) *objective = m->result.objective;
    if (attachment) *attachment = m->result.final_attachment;
    if (energy) *energy = m->result.final_energy;
    if (converged) *converged = m->result.converged ? 1 : 0;
    if (iterations) *iterations = m->result.iterations;
    return AG_OK;
}

void ag_match_destroy(ag_match* m) { delete m; }

int ag_shoot_points(const double* control_xy, const double* momenta_xy,
                    size_t n_control, const double* points_xy, size_t n_points,
                    int n_steps, double sigma_v, double* out_xy) {
    if (!control_xy || !momenta_xy || !points_xy || !out_xy) {
        return arg_error("null argument");
    }
    return guarded([&] {
        actigeo::MomentaField m{from_xy(control_xy, n_control),
                                from_xy(momenta_xy, n_control)};
        const actigeo::GeodesicPath path =
            actigeo::integrate_geodesic(m, n_steps, sigma_v);
        const actigeo::Points moved =
            actigeo::flow_points(path, from_xy(points_xy, n_points));
        to_xy(moved, out_xy);
    });
}

int ag_hamiltonian(const double* control_xy, const double* momenta_xy,
                   size_t n_control, double sigma_v, double* out) {
    if (!control_xy || !momenta_xy || !out) return arg_error("null argument");
    return guarded([&] {
        *out = actigeo::hamiltonian(from_xy(control_xy, n_control),
                                    from_xy(momenta_xy, n_control), sigma_v);
    });
}

int ag_curve_distance(const double* a_xy, size_t a_n, const double* b_xy,
                      size_t b_n, double sigma_w, double* out) {
    if (!a_xy || !b_xy || !out) return arg_error("null argument");
    return guarded([&] {
        actigeo::require(sigma_w > 0.0, "sigma_w must be > 0");
        *out = actigeo::current_distance_sq(
            actigeo::curve_to_current(from_xy(a_xy, a_n)),
            actigeo::curve_to_current(from_xy(b_xy, b_n)), sigma_w);
    });
}

}  // extern "C"
