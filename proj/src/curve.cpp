#include "curve.hpp"

#include <cmath>

namespace actigeo {

namespace {
constexpr double kRangeTol = 1e-9;
}

bool x_strictly_increasing(const Points& pts) {
    for (Eigen::Index i = 1; i < pts.rows(); ++i) {
        if (!(pts(i, 0) > pts(i - 1, 0))) return false;
    }
    return true;
}

void validate_curve_points(const Points& pts) {
    require(pts.rows() >= 4, "Curve: needs at least 4 points");
    require(pts.allFinite(), "Curve: coordinates must be finite");
    require(x_strictly_increasing(pts), "Curve: x must be strictly increasing");
    const double lo = pts.minCoeff();
    const double hi = pts.maxCoeff();
    require(lo >= -1.0 - kRangeTol && hi <= 1.0 + kRangeTol,
            "Curve: coordinates must lie in [-1, 1]");
}

double interp_linear(const VectorXd& xs, const VectorXd& ys, double x) {
    const Eigen::Index n = xs.size();
    if (x <= xs(0)) return ys(0);
    if (x >= xs(n - 1)) return ys(n - 1);
    // binary search for the bracketing interval
    Eigen::Index lo = 0, hi = n - 1;
    while (hi - lo > 1) {
        const Eigen::Index mid = (lo + hi) / 2;
        if (xs(mid) <= x) lo = mid;
        else hi = mid;
    }
    const double w = (x - xs(lo)) / (xs(hi) - xs(lo));
    return (1.0 - w) * ys(lo) + w * ys(hi);
}

VectorXd resample_y(const Points& pts, const VectorXd& grid_x) {
    require(x_strictly_increasing(pts),
            "resample_y: polyline x must be strictly increasing");
    const VectorXd xs = pts.col(0);
    const VectorXd ys = pts.col(1);
    VectorXd out(grid_x.size());
    for (Eigen::Index i = 0; i < grid_x.size(); ++i) {
        out(i) = interp_linear(xs, ys, grid_x(i));
    }
    return out;
}

}  // namespace actigeo
