#pragma once

#include "curve.hpp"
#include "shooting.hpp"

#include "json.hpp"

#include <string>
#include <vector>

namespace actigeo {

struct MatchConfig {
    double gamma_v = 0.01;  // energy penalty weight
    double gamma_w = 1.0;   // attachment penalty weight
    int n_steps = 11;
    double sigma_v = 0.2;
    double sigma_w = 0.1;
    int control_stride = 1;
    int max_iters = 500;
    double grad_tol = 1e-6;

    void validate() const;
};

struct MatchResult {
    Points control_points;
    Points momenta;
    std::vector<double> objective_trace;
    double objective = 0.0;
    double final_attachment = 0.0;
    double final_energy = 0.0;  // integral of ||v||^2, i.e. 2 H(q0, p0)
    bool converged = false;
    int iterations = 0;
    double wall_time_s = 0.0;
    std::vector<std::string> diagnostics;
};

// Every stride-th vertex of the source curve, always including the first and
// last vertices.
Points select_control_points(const Curve& source, int stride);

// Penalized objective of the deformation determined by momenta p0 placed on
// select_control_points(source, cfg.control_stride):
//   (gamma_w / 2) g(deformed source, target) + (gamma_v / 2) * 2 H(q0, p0)
double match_objective(const Points& p0, const Curve& source,
                       const Curve& target, const MatchConfig& cfg);

// Gradient of the discretized objective with respect to p0, computed by the
// discrete adjoint of the integrator. Returns the objective value.
double match_objective_gradient(const Points& p0, const Curve& source,
                                const Curve& target, const MatchConfig& cfg,
                                Points& grad);

MatchResult match_curves(const Curve& source, const Curve& target,
                         const MatchConfig& cfg);

// Deformed source curve produced by shooting the result's momenta.
Curve deformed_source(const MatchResult& r, const Curve& source,
                      const MatchConfig& cfg);

nlohmann::json match_config_to_json(const MatchConfig& cfg);
MatchConfig match_config_from_json(const nlohmann::json& j);
nlohmann::json match_result_to_json(const MatchResult& r,
                                    const MatchConfig& cfg,
                                    bool with_timing = true);
MatchResult match_result_from_json(const nlohmann::json& j);

}  // namespace actigeo
