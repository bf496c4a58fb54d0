#pragma once

#include "common.hpp"

#include <functional>
#include <vector>

namespace actigeo {

// f(x) with gradient written into `grad`; returns the objective value.
using ObjectiveFn = std::function<double(const VectorXd& x, VectorXd& grad)>;

struct LbfgsOptions {
    int max_iters = 500;
    double grad_tol = 1e-6;  // on the max-norm of the gradient
    // deep history pays off on the badly conditioned kernel objectives
    // this library minimizes; the extra memory is negligible at our sizes
    int history = 40;
    double armijo_c = 1e-4;
    double backtrack = 0.5;
    int max_line_search = 60;
};

struct LbfgsReport {
    VectorXd x;
    VectorXd grad;
    double f = 0.0;
    std::vector<double> trace;  // objective at x0 and after each accepted step
    bool converged = false;
    bool line_search_failed = false;
    int iterations = 0;
};

// Limited-memory quasi-Newton descent with backtracking Armijo line search.
// Returns the best iterate seen; `converged` is set when the gradient
// max-norm reaches grad_tol.
LbfgsReport lbfgs_minimize(const ObjectiveFn& fn, VectorXd x0,
                           const LbfgsOptions& opts = {});

}  // namespace actigeo
