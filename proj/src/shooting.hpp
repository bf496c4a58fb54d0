#pragma once

#include "common.hpp"

#include "json.hpp"

#include <vector>

namespace actigeo {

// Initial condition of a geodesic: control points q0 with one 2-vector of
// momentum per point. Under the minimal-energy constraint this fully
// determines the deformation.
struct MomentaField {
    Points q0;
    Points p0;

    void validate() const {
        require(q0.rows() == p0.rows() && q0.rows() >= 1,
                "MomentaField: |q0| must equal |p0| and be >= 1");
        require(q0.allFinite() && p0.allFinite(),
                "MomentaField: entries must be finite");
    }
};

struct GeodesicStep {
    Points q, p;
};

// Discretized trajectory of control points and momenta over the flow
// parameter; steps[k] is the state at tau = k / n_steps.
struct GeodesicPath {
    double sigma_v = 0.2;
    std::vector<GeodesicStep> steps;

    int n_steps() const { return static_cast<int>(steps.size()) - 1; }
};

// H(q, p) = 1/2 sum_{a,b} (p_a . p_b) k(q_a, q_b). Nonnegative; the deformation
// energy integral along a geodesic equals 2 H of the initial state.
double hamiltonian(const Points& q, const Points& p, double sigma_v);

// Integrates dq_j = sum_l k(q_j,q_l) p_l, dp_j = -dH/dq_j over tau in [0,1]
// with classical fourth-order Runge-Kutta steps. Throws a runtime error
// naming the step if the state blows up.
GeodesicPath integrate_geodesic(const MomentaField& m, int n_steps,
                                double sigma_v);

// Transports arbitrary points through the flow by re-integrating the coupled
// system (control points, momenta, passive points) from the path's initial
// state.
Points flow_points(const GeodesicPath& path, const Points& pts);

nlohmann::json path_to_json(const GeodesicPath& path);

// ---------------------------------------------------------------------------
// Coupled flow with passive points, used by curve matching. Passive points z
// are advected by the velocity field but carry no momenta.

struct FlowState {
    Points q, p, z;  // z may have zero rows

    FlowState scaled(double c) const;
    FlowState& add_scaled(const FlowState& o, double c);
    static FlowState zeros_like(const FlowState& s);
};

struct FlowTrajectory {
    double sigma_v = 0.2;
    double h = 0.0;  // step size 1 / n_steps
    std::vector<FlowState> states;
};

FlowTrajectory integrate_flow(FlowState s0, int n_steps, double sigma_v);

// Pulls a cotangent on the final state back to the initial state through the
// exact discrete RK4 map (reverse accumulation through every stage). The
// returned state holds d<cobar, final>/d(q0, p0, z0).
FlowState pullback_flow(const FlowTrajectory& traj, FlowState cobar);

}  // namespace actigeo
