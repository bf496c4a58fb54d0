#include "shooting.hpp"

#include "kernel.hpp"

#include <cmath>
#include <string>

namespace actigeo {

namespace {

constexpr double kBlowupLimit = 1e3;

// Time derivative of the coupled state. With K the control-point Gram matrix
// and W = K .* (p p^T):
//   dq = K p
//   dp_j = (1/s2) sum_l W_jl (q_j - q_l)
//   dz = k(z, q) p
FlowState dyn(const FlowState& s, double sigma_v) {
    const double s2 = sigma_v * sigma_v;
    const MatrixXd k = gram_matrix(s.q, sigma_v);
    FlowState out;
    out.q = k * s.p;

    const MatrixXd w = k.cwiseProduct(s.p * s.p.transpose());
    const VectorXd wrow = w.rowwise().sum();
    out.p = (wrow.asDiagonal() * s.q - w * s.q) / s2;

    if (s.z.rows() > 0) {
        out.z = cross_kernel(s.z, s.q, sigma_v) * s.p;
    } else {
        out.z.resize(0, 2);
    }
    return out;
}

// Vector-Jacobian product of dyn: given cotangents a = (aq, ap, az) against
// the outputs of dyn at state s, returns (d dyn / d s)^T a.
FlowState dyn_vjp(const FlowState& s, const FlowState& a, double sigma_v) {
    const double s2 = sigma_v * sigma_v;
    const Eigen::Index n = s.q.rows();
    const MatrixXd k = gram_matrix(s.q, sigma_v);

    FlowState out;
    out.q = Points::Zero(n, 2);
    out.p = Points::Zero(n, 2);
    out.z.resize(s.z.rows(), 2);

    // --- through dq = K p ---
    out.p += k * a.q;
    {
        const MatrixXd b =
            k.cwiseProduct(a.q * s.p.transpose() + s.p * a.q.transpose());
        const VectorXd brow = b.rowwise().sum();
        out.q -= (brow.asDiagonal() * s.q - b * s.q) / s2;
    }

    // --- through dp_j = (1/s2) sum_l K_jl (p_j.p_l)(q_j - q_l) ---
    {
        const MatrixXd w = k.cwiseProduct(s.p * s.p.transpose());
        // A_ml = (ap_m - ap_l) . (q_m - q_l), assembled from rank-one pieces
        const VectorXd alpha = (a.p.array() * s.q.array()).rowwise().sum();
        MatrixXd pair = -(a.p * s.q.transpose()) - s.q * a.p.transpose();
        pair.colwise() += alpha;
        pair.rowwise() += alpha.transpose();

        const MatrixXd m = k.cwiseProduct(pair);
        out.p += (m * s.p) / s2;

        const VectorXd wrow = w.rowwise().sum();
        out.q += (wrow.asDiagonal() * a.p - w * a.p) / s2;

        const MatrixXd c = w.cwiseProduct(pair);
        const VectorXd crow = c.rowwise().sum();
        out.q -= (crow.asDiagonal() * s.q - c * s.q) / (s2 * s2);
    }

    // --- through dz = k(z, q) p ---
    if (s.z.rows() > 0) {
        const MatrixXd kz = cross_kernel(s.z, s.q, sigma_v);
        out.p += kz.transpose() * a.z;

        const MatrixXd g = kz.cwiseProduct(a.z * s.p.transpose());
        const VectorXd gcol = g.colwise().sum();
        const VectorXd grow = g.rowwise().sum();
        out.q += (g.transpose() * s.z - gcol.asDiagonal() * s.q) / s2;
        out.z = -(grow.asDiagonal() * s.z - g * s.q) / s2;
    }
    return out;
}

void check_finite(const FlowState& s, int step) {
    const bool ok = s.q.allFinite() && s.p.allFinite() && s.z.allFinite() &&
                    s.q.cwiseAbs().maxCoeff() < kBlowupLimit;
    if (!ok) {
        fail_runtime("geodesic integration blew up at step " +
                     std::to_string(step));
    }
}

FlowState rk4_step(const FlowState& s, double h, double sigma_v) {
    const FlowState k1 = dyn(s, sigma_v);
    FlowState u = s;
    u.add_scaled(k1, h / 2);
    const FlowState k2 = dyn(u, sigma_v);
    u = s;
    u.add_scaled(k2, h / 2);
    const FlowState k3 = dyn(u, sigma_v);
    u = s;
    u.add_scaled(k3, h);
    const FlowState k4 = dyn(u, sigma_v);

    FlowState next = s;
    next.add_scaled(k1, h / 6);
    next.add_scaled(k2, h / 3);
    next.add_scaled(k3, h / 3);
    next.add_scaled(k4, h / 6);
    return next;
}

}  // namespace

FlowState FlowState::scaled(double c) const {
    FlowState out;
    out.q = q * c;
    out.p = p * c;
    out.z = z * c;
    return out;
}

FlowState& FlowState::add_scaled(const FlowState& o, double c) {
    q += c * o.q;
    p += c * o.p;
    if (z.rows() > 0) z += c * o.z;
    return *this;
}

FlowState FlowState::zeros_like(const FlowState& s) {
    FlowState out;
    out.q = Points::Zero(s.q.rows(), 2);
    out.p = Points::Zero(s.p.rows(), 2);
    out.z = Points::Zero(s.z.rows(), 2);
    return out;
}

double hamiltonian(const Points& q, const Points& p, double sigma_v) {
    require(q.rows() == p.rows(), "hamiltonian: |q| must equal |p|");
    const MatrixXd k = gram_matrix(q, sigma_v);
    return 0.5 * (k.cwiseProduct(p * p.transpose())).sum();
}

FlowTrajectory integrate_flow(FlowState s0, int n_steps, double sigma_v) {
    require(n_steps >= 1, "integrate_flow: n_steps must be >= 1");
    require(sigma_v > 0.0, "integrate_flow: sigma_v must be > 0");
    FlowTrajectory traj;
    traj.sigma_v = sigma_v;
    traj.h = 1.0 / n_steps;
    traj.states.reserve(n_steps + 1);
    traj.states.push_back(std::move(s0));
    for (int step = 0; step < n_steps; ++step) {
        traj.states.push_back(rk4_step(traj.states.back(), traj.h, sigma_v));
        check_finite(traj.states.back(), step + 1);
    }
    return traj;
}

FlowState pullback_flow(const FlowTrajectory& traj, FlowState cobar) {
    const double h = traj.h;
    const int n_steps = static_cast<int>(traj.states.size()) - 1;
    for (int step = n_steps - 1; step >= 0; --step) {
        const FlowState& s = traj.states[step];

        // recompute the stage points of this step
        const FlowState k1 = dyn(s, traj.sigma_v);
        FlowState u2 = s;
        u2.add_scaled(k1, h / 2);
        const FlowState k2 = dyn(u2, traj.sigma_v);
        FlowState u3 = s;
        u3.add_scaled(k2, h / 2);
        FlowState u4 = s;
        u4.add_scaled(dyn(u3, traj.sigma_v), h);

        // reverse accumulation through the four stages
        FlowState kb = cobar.scaled(h / 6);
        const FlowState ub4 = dyn_vjp(u4, kb, traj.sigma_v);

        kb = cobar.scaled(h / 3);
        kb.add_scaled(ub4, h);
        const FlowState ub3 = dyn_vjp(u3, kb, traj.sigma_v);

        kb = cobar.scaled(h / 3);
        kb.add_scaled(ub3, h / 2);
        const FlowState ub2 = dyn_vjp(u2, kb, traj.sigma_v);

        kb = cobar.scaled(h / 6);
        kb.add_scaled(ub2, h / 2);
        const FlowState ub1 = dyn_vjp(s, kb, traj.sigma_v);

        cobar.add_scaled(ub1, 1.0);
        cobar.add_scaled(ub2, 1.0);
        cobar.add_scaled(ub3, 1.0);
        cobar.add_scaled(ub4, 1.0);
    }
    return cobar;
}

GeodesicPath integrate_geodesic(const MomentaField& m, int n_steps,
                                double sigma_v) {
    m.validate();
    FlowState s0;
    s0.q = m.q0;
    s0.p = m.p0;
    s0.z.resize(0, 2);
    const FlowTrajectory traj = integrate_flow(std::move(s0), n_steps, sigma_v);

    GeodesicPath path;
    path.sigma_v = sigma_v;
    path.steps.reserve(traj.states.size());
    for (const FlowState& s : traj.states) {
        path.steps.push_back(GeodesicStep{s.q, s.p});
    }
    return path;
}

Points flow_points(const GeodesicPath& path, const Points& pts) {
    require(!path.steps.empty(), "flow_points: empty path");
    FlowState s0;
    s0.q = path.steps.front().q;
    s0.p = path.steps.front().p;
    s0.z = pts;
    const FlowTrajectory traj =
        integrate_flow(std::move(s0), path.n_steps(), path.sigma_v);
    return traj.states.back().z;
}

nlohmann::json path_to_json(const GeodesicPath& path) {
    nlohmann::json steps = nlohmann::json::array();
    for (const GeodesicStep& s : path.steps) {
        nlohmann::json q = nlohmann::json::array();
        nlohmann::json p = nlohmann::json::array();
        for (Eigen::Index i = 0; i < s.q.rows(); ++i) {
            q.push_back({s.q(i, 0), s.q(i, 1)});
            p.push_back({s.p(i, 0), s.p(i, 1)});
        }
        steps.push_back({{"q", q}, {"p", p}});
    }
    return {{"sigma_v", path.sigma_v},
            {"n_steps", path.n_steps()},
            {"steps", steps}};
}

}  // namespace actigeo
