#include "matching.hpp"

#include "currents.hpp"
#include "kernel.hpp"
#include "lbfgs.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace actigeo {

namespace {

// x-block then y-block, the same layout the momenta PCA uses
VectorXd flatten(const Points& p) {
    VectorXd v(2 * p.rows());
    v.head(p.rows()) = p.col(0);
    v.tail(p.rows()) = p.col(1);
    return v;
}

Points unflatten(const VectorXd& v) {
    const Eigen::Index n = v.size() / 2;
    Points p(n, 2);
    p.col(0) = v.head(n);
    p.col(1) = v.tail(n);
    return p;
}

struct Problem {
    Points q0;
    Points z0;        // full source polyline; empty when it equals q0
    CurrentRep target;
    MatchConfig cfg;

    bool curve_is_control() const { return z0.rows() == 0; }

    // forward flow from momenta; deformed curve is z (or q) at tau = 1
    FlowTrajectory flow(const Points& p0) const {
        FlowState s0;
        s0.q = q0;
        s0.p = p0;
        s0.z = z0;
        return integrate_flow(std::move(s0), cfg.n_steps, cfg.sigma_v);
    }

    const Points& deformed(const FlowTrajectory& traj) const {
        const FlowState& end = traj.states.back();
        return curve_is_control() ? end.q : end.z;
    }

    double value(const Points& p0) const {
        const FlowTrajectory traj = flow(p0);
        const double g = current_distance_sq(
            curve_to_current(deformed(traj)), target, cfg.sigma_w);
        const double energy = 2.0 * hamiltonian(q0, p0, cfg.sigma_v);
        return 0.5 * cfg.gamma_w * g + 0.5 * cfg.gamma_v * energy;
    }

    double value_grad(const Points& p0, Points& grad) const {
        const FlowTrajectory traj = flow(p0);

        Points d_pts;
        const double g = current_distance_sq_grad(deformed(traj), target,
                                                  cfg.sigma_w, d_pts);

        FlowState cobar = FlowState::zeros_like(traj.states.back());
        if (curve_is_control()) {
            cobar.q = 0.5 * cfg.gamma_w * d_pts;
        } else {
            cobar.z = 0.5 * cfg.gamma_w * d_pts;
        }
        const FlowState at0 = pullback_flow(traj, std::move(cobar));

        // energy term depends on the initial state only
        grad = at0.p + cfg.gamma_v * (gram_matrix(q0, cfg.sigma_v) * p0);

        const double energy = 2.0 * hamiltonian(q0, p0, cfg.sigma_v);
        return 0.5 * cfg.gamma_w * g + 0.5 * cfg.gamma_v * energy;
    }
};

Problem make_problem(const Curve& source, const Curve& target,
                     const MatchConfig& cfg) {
    cfg.validate();
    validate_curve_points(source.pts);
    validate_curve_points(target.pts);
    Problem prob;
    prob.q0 = select_control_points(source, cfg.control_stride);
    if (cfg.control_stride == 1) {
        prob.z0.resize(0, 2);
    } else {
        prob.z0 = source.pts;
    }
    prob.target = curve_to_current(target.pts);
    prob.cfg = cfg;
    return prob;
}

}  // namespace

void MatchConfig::validate() const {
    require(gamma_v > 0.0 && gamma_w > 0.0,
            "MatchConfig: penalty weights must be > 0");
    require(sigma_v > 0.0 && sigma_w > 0.0,
            "MatchConfig: kernel widths must be > 0");
    require(n_steps >= 1, "MatchConfig: n_steps must be >= 1");
    require(control_stride >= 1, "MatchConfig: control_stride must be >= 1");
    require(max_iters >= 1, "MatchConfig: max_iters must be >= 1");
    require(grad_tol > 0.0, "MatchConfig: grad_tol must be > 0");
}

Points select_control_points(const Curve& source, int stride) {
    require(stride >= 1, "select_control_points: stride must be >= 1");
    const Eigen::Index n = source.size();
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < n; i += stride) idx.push_back(i);
    if (idx.back() != n - 1) idx.push_back(n - 1);
    require(idx.size() >= 2, "select_control_points: fewer than 2 points");
    Points q(idx.size(), 2);
    for (std::size_t i = 0; i < idx.size(); ++i) q.row(i) = source.pts.row(idx[i]);
    return q;
}

double match_objective(const Points& p0, const Curve& source,
                       const Curve& target, const MatchConfig& cfg) {
    const Problem prob = make_problem(source, target, cfg);
    require(p0.rows() == prob.q0.rows(),
            "match_objective: momenta size does not match control points");
    return prob.value(p0);
}

double match_objective_gradient(const Points& p0, const Curve& source,
                                const Curve& target, const MatchConfig& cfg,
                                Points& grad) {
    const Problem prob = make_problem(source, target, cfg);
    require(p0.rows() == prob.q0.rows(),
            "match_objective_gradient: momenta size does not match control points");
    return prob.value_grad(p0, grad);
}

MatchResult match_curves(const Curve& source, const Curve& target,
                         const MatchConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    const Problem prob = make_problem(source, target, cfg);
    const Eigen::Index n_g = prob.q0.rows();

    MatchResult res;
    res.control_points = prob.q0;

    const double g0 = current_distance_sq(curve_to_current(source.pts),
                                          prob.target, cfg.sigma_w);
    if (g0 < 1e-10) {
        res.diagnostics.push_back(
            "source and target are nearly identical; momenta will be ~0");
    }

    const ObjectiveFn fn = [&prob](const VectorXd& x, VectorXd& grad_out) {
        // an exploding trial flow is an over-long step, not a failure: hand
        // the line search an infinite value so it backtracks
        try {
            Points grad;
            const double f = prob.value_grad(unflatten(x), grad);
            grad_out = flatten(grad);
            return f;
        } catch (const Error&) {
            grad_out = VectorXd::Zero(x.size());
            return std::numeric_limits<double>::infinity();
        }
    };

    LbfgsOptions opts;
    opts.max_iters = cfg.max_iters;
    opts.grad_tol = cfg.grad_tol;
    const LbfgsReport rep =
        lbfgs_minimize(fn, VectorXd::Zero(2 * n_g), opts);

    res.momenta = unflatten(rep.x);
    res.objective_trace = rep.trace;
    res.objective = rep.f;
    res.converged = rep.converged;
    res.iterations = rep.iterations;
    if (rep.line_search_failed) {
        res.diagnostics.push_back(
            "line search failed; returning best iterate");
    }

    const FlowTrajectory traj = prob.flow(res.momenta);
    res.final_attachment = current_distance_sq(
        curve_to_current(prob.deformed(traj)), prob.target, cfg.sigma_w);
    res.final_energy = 2.0 * hamiltonian(prob.q0, res.momenta, cfg.sigma_v);
    if (!x_strictly_increasing(prob.deformed(traj))) {
        res.diagnostics.push_back(
            "deformed curve is not x-monotone (flow folded the graph)");
    }

    res.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();
    return res;
}

Curve deformed_source(const MatchResult& r, const Curve& source,
                      const MatchConfig& cfg) {
    MomentaField m{r.control_points, r.momenta};
    const GeodesicPath path = integrate_geodesic(m, cfg.n_steps, cfg.sigma_v);
    Points pts = flow_points(path, source.pts);
    return Curve{std::move(pts)};  // may exceed the frame slightly; not revalidated
}

nlohmann::json match_config_to_json(const MatchConfig& cfg) {
    return {{"gamma_v", cfg.gamma_v},     {"gamma_w", cfg.gamma_w},
            {"n_steps", cfg.n_steps},     {"sigma_v", cfg.sigma_v},
            {"sigma_w", cfg.sigma_w},     {"control_stride", cfg.control_stride},
            {"max_iters", cfg.max_iters}, {"grad_tol", cfg.grad_tol}};
}

MatchConfig match_config_from_json(const nlohmann::json& j) {
    MatchConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "gamma_v") cfg.gamma_v = value.get<double>();
        else if (key == "gamma_w") cfg.gamma_w = value.get<double>();
        else if (key == "n_steps") cfg.n_steps = value.get<int>();
        else if (key == "sigma_v") cfg.sigma_v = value.get<double>();
        else if (key == "sigma_w") cfg.sigma_w = value.get<double>();
        else if (key == "control_stride") cfg.control_stride = value.get<int>();
        else if (key == "max_iters") cfg.max_iters = value.get<int>();
        else if (key == "grad_tol") cfg.grad_tol = value.get<double>();
        else fail_validation("unknown match option: " + key);
    }
    cfg.validate();
    return cfg;
}

namespace {
nlohmann::json points_to_json(const Points& p) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < p.rows(); ++i) arr.push_back({p(i, 0), p(i, 1)});
    return arr;
}

Points points_from_json(const nlohmann::json& arr) {
    Points p(arr.size(), 2);
    for (std::size_t i = 0; i < arr.size(); ++i) {
        p(static_cast<Eigen::Index>(i), 0) = arr[i][0].get<double>();
        p(static_cast<Eigen::Index>(i), 1) = arr[i][1].get<double>();
    }
    return p;
}
}  // namespace

nlohmann::json match_result_to_json(const MatchResult& r,
                                    const MatchConfig& cfg, bool with_timing) {
    nlohmann::json j{{"control_points", points_to_json(r.control_points)},
                     {"momenta", points_to_json(r.momenta)},
                     {"objective_trace", r.objective_trace},
                     {"objective", r.objective},
                     {"final_attachment", r.final_attachment},
                     {"final_energy", r.final_energy},
                     {"converged", r.converged},
                     {"iterations", r.iterations},
                     {"diagnostics", r.diagnostics},
                     {"config", match_config_to_json(cfg)}};
    if (with_timing) j["wall_time_s"] = r.wall_time_s;
    return j;
}

MatchResult match_result_from_json(const nlohmann::json& j) {
    MatchResult r;
    r.control_points = points_from_json(j.at("control_points"));
    r.momenta = points_from_json(j.at("momenta"));
    r.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    r.objective = j.at("objective").get<double>();
    r.final_attachment = j.at("final_attachment").get<double>();
    r.final_energy = j.at("final_energy").get<double>();
    r.converged = j.at("converged").get<bool>();
    r.iterations = j.at("iterations").get<int>();
    r.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
    if (j.contains("wall_time_s")) r.wall_time_s = j["wall_time_s"].get<double>();
    return r;
}

}  // namespace actigeo
