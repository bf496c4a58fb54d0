#include "currents.hpp"

#include "kernel.hpp"

namespace actigeo {

CurrentRep curve_to_current(const Points& pts) {
    require(pts.rows() >= 2, "curve_to_current: needs at least 2 points");
    const Eigen::Index m = pts.rows() - 1;
    CurrentRep rep;
    rep.centers = 0.5 * (pts.topRows(m) + pts.bottomRows(m));
    rep.tangents = pts.bottomRows(m) - pts.topRows(m);
    return rep;
}

double current_scalar_product(const CurrentRep& a, const CurrentRep& b,
                              double sigma_w) {
    require(a.centers.rows() > 0 && b.centers.rows() > 0,
            "current_scalar_product: empty representation");
    const MatrixXd k = cross_kernel(a.centers, b.centers, sigma_w);
    return k.cwiseProduct(a.tangents * b.tangents.transpose()).sum();
}

double current_distance_sq(const CurrentRep& a, const CurrentRep& b,
                           double sigma_w) {
    const double g = current_scalar_product(a, a, sigma_w) -
                     2.0 * current_scalar_product(a, b, sigma_w) +
                     current_scalar_product(b, b, sigma_w);
    return g < 0.0 ? 0.0 : g;
}

double current_distance_sq_grad(const Points& a_pts, const CurrentRep& b,
                                double sigma_w, Points& grad) {
    const CurrentRep a = curve_to_current(a_pts);
    const Eigen::Index m = a.centers.rows();
    const double s2 = sigma_w * sigma_w;

    const MatrixXd kaa = cross_kernel(a.centers, a.centers, sigma_w);
    const MatrixXd kab = cross_kernel(a.centers, b.centers, sigma_w);

    const double g = kaa.cwiseProduct(a.tangents * a.tangents.transpose()).sum() -
                     2.0 * kab.cwiseProduct(a.tangents * b.tangents.transpose()).sum() +
                     current_scalar_product(b, b, sigma_w);

    // d/d centers: the kernel factors pull in the center differences
    const MatrixXd waa = kaa.cwiseProduct(a.tangents * a.tangents.transpose());
    const MatrixXd wab = kab.cwiseProduct(a.tangents * b.tangents.transpose());
    const VectorXd waa_row = waa.rowwise().sum();
    const VectorXd wab_row = wab.rowwise().sum();
    const Points d_centers =
        (-2.0 / s2) * (waa_row.asDiagonal() * a.centers - waa * a.centers) +
        (2.0 / s2) * (wab_row.asDiagonal() * a.centers - wab * b.centers);

    // d/d tangents: linear pairing
    const Points d_tangents = 2.0 * (kaa * a.tangents - kab * b.tangents);

    // scatter segment quantities back to polyline vertices:
    // c_s = (P_s + P_{s+1}) / 2, t_s = P_{s+1} - P_s
    grad = Points::Zero(a_pts.rows(), 2);
    grad.topRows(m) += 0.5 * d_centers - d_tangents;
    grad.bottomRows(m) += 0.5 * d_centers + d_tangents;

    return g < 0.0 ? 0.0 : g;
}

}  // namespace actigeo
