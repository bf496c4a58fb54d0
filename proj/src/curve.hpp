#pragma once

#include "common.hpp"

#include <algorithm>
#include <vector>

namespace actigeo {

// Cohort-global affine map between raw coordinates (minutes, magnitude) and
// the normalized [-1, 1] x [-1, 1] analysis frame. The same parameters must
// be applied to every subject and visit of a cohort.
struct ScaleParams {
    double t_min = 360.0;
    double t_max = 1439.0;
    double m_max = 1.0;

    void validate() const {
        require(t_min < t_max, "ScaleParams: t_min must be < t_max");
        require(m_max > 0.0 && std::isfinite(m_max),
                "ScaleParams: m_max must be a positive finite value");
    }
};

inline double time_to_x(double t, const ScaleParams& s) {
    return 2.0 * (t - s.t_min) / (s.t_max - s.t_min) - 1.0;
}
inline double x_to_time(double x, const ScaleParams& s) {
    return s.t_min + (x + 1.0) * 0.5 * (s.t_max - s.t_min);
}
inline double mag_to_y(double v, const ScaleParams& s) {
    return 2.0 * std::clamp(v, 0.0, s.m_max) / s.m_max - 1.0;
}
inline double y_to_mag(double y, const ScaleParams& s) {
    return (y + 1.0) * 0.5 * s.m_max;
}

// Ordered planar polyline with strictly increasing x; one subject-visit
// activity profile in normalized coordinates.
struct Curve {
    Points pts;

    Eigen::Index size() const { return pts.rows(); }
    double x(Eigen::Index i) const { return pts(i, 0); }
    double y(Eigen::Index i) const { return pts(i, 1); }
};

// Throws a validation error unless `pts` is a well-formed Curve: at least
// 4 points, x strictly increasing, both coordinates within [-1, 1] up to
// 1e-9 and finite.
void validate_curve_points(const Points& pts);

inline Curve make_curve(Points pts) {
    validate_curve_points(pts);
    return Curve{std::move(pts)};
}

bool x_strictly_increasing(const Points& pts);

// Piecewise-linear y(x) evaluated at `x`, clamped to the end values outside
// the x-range. `xs` must be strictly increasing.
double interp_linear(const VectorXd& xs, const VectorXd& ys, double x);

// Resamples a polyline (monotone x required) onto the given x grid.
VectorXd resample_y(const Points& pts, const VectorXd& grid_x);

}  // namespace actigeo
