#pragma once

#include "common.hpp"

namespace actigeo {

struct SplineFit {
    VectorXd fitted;
    double lambda = 0.0;
    double df = 0.0;  // achieved smoother-matrix trace
};

// Natural cubic smoothing spline on the given strictly increasing grid,
// with the penalty weight chosen by bisection in log-lambda over
// [1e-12, 1e6] so that the smoother-matrix trace hits target_df (+-0.1).
// Throws a runtime error reporting the achievable df range when the target
// lies outside the bracket.
SplineFit smooth_spline(const VectorXd& x, const VectorXd& y,
                        double target_df);

// Fitted values at a fixed penalty; O(n) via the banded Reinsch system.
VectorXd spline_fit_at(const VectorXd& x, const VectorXd& y, double lambda);

// trace of the smoother matrix at a fixed penalty, computed exactly from the
// banded system (Takahashi recurrences for the in-band inverse entries).
double spline_trace_at(const VectorXd& x, double lambda);

}  // namespace actigeo
