#include "kernel.hpp"

#include <cmath>

namespace actigeo {

double kernel_scalar(const Vector2d& a, const Vector2d& b, double sigma_v) {
    const double d2 = (a - b).squaredNorm();
    return std::exp(-d2 / (2.0 * sigma_v * sigma_v));
}

MatrixXd cross_kernel(const Points& a, const Points& b, double sigma_v) {
    const VectorXd na = a.rowwise().squaredNorm();
    const VectorXd nb = b.rowwise().squaredNorm();
    MatrixXd d2 = -2.0 * (a * b.transpose());
    d2.colwise() += na;
    d2.rowwise() += nb.transpose();
    return (d2 * (-0.5 / (sigma_v * sigma_v))).array().exp().matrix();
}

MatrixXd gram_matrix(const Points& q, double sigma_v) {
    MatrixXd k = cross_kernel(q, q, sigma_v);
    k.diagonal().setOnes();  // exact at zero distance
    return k;
}

Points eval_vector_field(const Points& targets, const Points& q,
                         const Points& p, double sigma_v) {
    require(q.rows() == p.rows(),
            "eval_vector_field: control points and momenta sizes differ");
    return cross_kernel(targets, q, sigma_v) * p;
}

}  // namespace actigeo
