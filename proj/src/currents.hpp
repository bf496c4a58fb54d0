#pragma once

#include "common.hpp"

namespace actigeo {

// Discretized oriented-curve representation: one delta per polyline segment,
// located at the segment midpoint and weighted by the (length-carrying)
// difference vector.
struct CurrentRep {
    Points centers;
    Points tangents;
};

CurrentRep curve_to_current(const Points& pts);

// <a, b>_W = sum_{s,s'} exp(-|c_s - c_s'|^2 / (2 sigma_w^2)) (t_s . t_s')
double current_scalar_product(const CurrentRep& a, const CurrentRep& b,
                              double sigma_w);

// ||a - b||_W^2, clamped at zero against roundoff.
double current_distance_sq(const CurrentRep& a, const CurrentRep& b,
                           double sigma_w);

// Squared distance between curve_to_current(a_pts) and the fixed rep b,
// together with its gradient with respect to the points of a. Returns the
// distance value.
double current_distance_sq_grad(const Points& a_pts, const CurrentRep& b,
                                double sigma_w, Points& grad);

}  // namespace actigeo
