#pragma once

#include "common.hpp"

namespace actigeo {

// Gaussian isotropic deformation kernel. The matrix-valued kernel is this
// scalar times the 2x2 identity, so vector-field evaluation reduces to
// scalar-kernel sums per coordinate.
double kernel_scalar(const Vector2d& a, const Vector2d& b, double sigma_v);

// k(q_i, q_j) for all pairs; symmetric positive semidefinite.
MatrixXd gram_matrix(const Points& q, double sigma_v);

// k(a_i, b_j) rectangular kernel matrix.
MatrixXd cross_kernel(const Points& a, const Points& b, double sigma_v);

// v(z) = sum_j k(q_j, z) p_j evaluated at every target point.
Points eval_vector_field(const Points& targets, const Points& q,
                         const Points& p, double sigma_v);

}  // namespace actigeo
