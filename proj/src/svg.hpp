#pragma once

#include "curve.hpp"

#include <string>
#include <utility>
#include <vector>

namespace actigeo::svg {

struct FigureOptions {
    int width = 960;
    int height = 540;
    int arrow_stride = 10;     // draw an arrow at every k-th control point
    double arrow_scale = 1.0;  // display multiplier on momenta vectors
    std::string title;
};

// Baseline curve with momenta arrows, the shot (estimated) follow-up and the
// actual target curve. Axis labels are in clock time and original magnitude.
std::string render_match_figure(const Curve& baseline, const Curve& target,
                                const Curve& deformed, const Points& control,
                                const Points& momenta, const ScaleParams& sp,
                                const FigureOptions& opts);

// Template curve with one deformed overlay per multiplier (e.g. +1 and -1
// times a principal component) and the component's momenta arrows. When
// `momenta` has zero rows (vertical-difference models) the overlays are the
// curves alone.
std::string render_pc_figure(
    const Curve& template_curve,
    const std::vector<std::pair<double, Curve>>& flows, const Points& control,
    const Points& momenta, const ScaleParams& sp, const FigureOptions& opts);

}  // namespace actigeo::svg
