#include "svg.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace actigeo::svg {

namespace {

constexpr double kMarginLeft = 64.0;
constexpr double kMarginRight = 18.0;
constexpr double kMarginTop = 34.0;
constexpr double kMarginBottom = 46.0;

struct Frame {
    double w, h;
    // normalized view box, slightly padded beyond [-1, 1]
    double x0 = -1.08, x1 = 1.08, y0 = -1.08, y1 = 1.08;

    double px(double x) const {
        return kMarginLeft + (x - x0) / (x1 - x0) * (w - kMarginLeft - kMarginRight);
    }
    double py(double y) const {
        return h - kMarginBottom -
               (y - y0) / (y1 - y0) * (h - kMarginTop - kMarginBottom);
    }
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

void path_for(std::ostringstream& out, const Frame& fr, const Points& pts,
              const std::string& stroke, const std::string& dash,
              const std::string& cls) {
    out << "<path class=\"" << cls << "\" fill=\"none\" stroke=\"" << stroke
        << "\" stroke-width=\"1.6\"";
    if (!dash.empty()) out << " stroke-dasharray=\"" << dash << "\"";
    out << " d=\"";
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        out << (i == 0 ? 'M' : 'L') << num(fr.px(pts(i, 0))) << ' '
            << num(fr.py(pts(i, 1)));
    }
    out << "\"/>\n";
}

void arrows_for(std::ostringstream& out, const Frame& fr, const Points& control,
                const Points& momenta, int stride, double scale) {
    for (Eigen::Index i = 0; i < control.rows(); i += stride) {
        const double mx = momenta(i, 0) * scale;
        const double my = momenta(i, 1) * scale;
        if (std::hypot(mx, my) < 1e-9) continue;  // zero-length arrows omitted
        const double ax = fr.px(control(i, 0));
        const double ay = fr.py(control(i, 1));
        const double bx = fr.px(control(i, 0) + mx);
        const double by = fr.py(control(i, 1) + my);
        const double dx = bx - ax, dy = by - ay;
        const double len = std::hypot(dx, dy);
        const double ux = dx / len, uy = dy / len;
        const double hx = bx - 4.0 * ux, hy = by - 4.0 * uy;
        out << "<g class=\"arrow\" stroke=\"#7fb2e5\" stroke-width=\"1.1\">"
            << "<line x1=\"" << num(ax) << "\" y1=\"" << num(ay) << "\" x2=\""
            << num(bx) << "\" y2=\"" << num(by) << "\"/>"
            << "<line x1=\"" << num(bx) << "\" y1=\"" << num(by) << "\" x2=\""
            << num(hx - 2.0 * uy) << "\" y2=\"" << num(hy + 2.0 * ux) << "\"/>"
            << "<line x1=\"" << num(bx) << "\" y1=\"" << num(by) << "\" x2=\""
            << num(hx + 2.0 * uy) << "\" y2=\"" << num(hy - 2.0 * ux) << "\"/>"
            << "</g>\n";
    }
}

std::string clock_label(int minute) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%d:%02d", minute / 60, minute % 60);
    return buf;
}

double nice_step(double range, int target_ticks) {
    const double raw = range / target_ticks;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        if (mag * m >= raw) return mag * m;
    }
    return mag * 10.0;
}

void axes_for(std::ostringstream& out, const Frame& fr, const ScaleParams& sp) {
    out << "<g class=\"axes\" stroke=\"#444\" stroke-width=\"1\" "
           "font-family=\"sans-serif\" font-size=\"11\">\n";
    const double xb0 = fr.px(-1.0), xb1 = fr.px(1.0);
    const double yb0 = fr.py(-1.0), yb1 = fr.py(1.0);
    out << "<line x1=\"" << num(xb0) << "\" y1=\"" << num(yb0) << "\" x2=\""
        << num(xb1) << "\" y2=\"" << num(yb0) << "\"/>\n";
    out << "<line x1=\"" << num(xb0) << "\" y1=\"" << num(yb0) << "\" x2=\""
        << num(xb0) << "\" y2=\"" << num(yb1) << "\"/>\n";

    // clock-time ticks every 3 hours
    const int t0 = static_cast<int>(std::ceil(sp.t_min / 180.0)) * 180;
    for (int t = t0; t <= static_cast<int>(sp.t_max); t += 180) {
        const double x = fr.px(time_to_x(t, sp));
        out << "<line x1=\"" << num(x) << "\" y1=\"" << num(yb0) << "\" x2=\""
            << num(x) << "\" y2=\"" << num(yb0 + 4) << "\"/>";
        out << "<text x=\"" << num(x) << "\" y=\"" << num(yb0 + 17)
            << "\" text-anchor=\"middle\" stroke=\"none\" fill=\"#444\">"
            << clock_label(t) << "</text>\n";
    }
    // magnitude ticks
    const double step = nice_step(sp.m_max, 4);
    for (double v = 0.0; v <= sp.m_max + 1e-9; v += step) {
        const double y = fr.py(mag_to_y(v, sp));
        out << "<line x1=\"" << num(xb0 - 4) << "\" y1=\"" << num(y)
            << "\" x2=\"" << num(xb0) << "\" y2=\"" << num(y) << "\"/>";
        char lbl[32];
        std::snprintf(lbl, sizeof(lbl), "%g", v);
        out << "<text x=\"" << num(xb0 - 7) << "\" y=\"" << num(y + 4)
            << "\" text-anchor=\"end\" stroke=\"none\" fill=\"#444\">" << lbl
            << "</text>\n";
    }
    out << "<text x=\"" << num(0.5 * (xb0 + xb1)) << "\" y=\""
        << num(yb0 + 34)
        << "\" text-anchor=\"middle\" stroke=\"none\" fill=\"#444\">time of "
           "day</text>\n";
    out << "<text x=\"14\" y=\"" << num(0.5 * (yb0 + yb1))
        << "\" text-anchor=\"middle\" stroke=\"none\" fill=\"#444\" "
           "transform=\"rotate(-90 14 "
        << num(0.5 * (yb0 + yb1)) << ")\">activity (vm)</text>\n";
    out << "</g>\n";
}

std::string header(const FigureOptions& opts) {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" "
           "width=\""
        << opts.width << "\" height=\"" << opts.height << "\" viewBox=\"0 0 "
        << opts.width << ' ' << opts.height << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!opts.title.empty()) {
        out << "<text x=\"" << opts.width / 2
            << "\" y=\"20\" text-anchor=\"middle\" "
               "font-family=\"sans-serif\" font-size=\"14\" fill=\"#222\">"
            << opts.title << "</text>\n";
    }
    return out.str();
}

void legend_entry(std::ostringstream& out, double x, double y,
                  const std::string& color, const std::string& dash,
                  const std::string& label) {
    out << "<line x1=\"" << num(x) << "\" y1=\"" << num(y) << "\" x2=\""
        << num(x + 26) << "\" y2=\"" << num(y) << "\" stroke=\"" << color
        << "\" stroke-width=\"1.6\"";
    if (!dash.empty()) out << " stroke-dasharray=\"" << dash << "\"";
    out << "/><text x=\"" << num(x + 32) << "\" y=\"" << num(y + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">"
        << label << "</text>\n";
}

}  // namespace

std::string render_match_figure(const Curve& baseline, const Curve& target,
                                const Curve& deformed, const Points& control,
                                const Points& momenta, const ScaleParams& sp,
                                const FigureOptions& opts) {
    Frame fr{static_cast<double>(opts.width), static_cast<double>(opts.height)};
    std::ostringstream out;
    out << header(opts);
    axes_for(out, fr, sp);
    path_for(out, fr, baseline.pts, "#1b2a6b", "", "curve-baseline");
    path_for(out, fr, target.pts, "#c22f2f", "", "curve-target");
    path_for(out, fr, deformed.pts, "#111111", "6,4", "curve-deformed");
    arrows_for(out, fr, control, momenta, opts.arrow_stride, opts.arrow_scale);
    legend_entry(out, fr.px(-1.0) + 8, kMarginTop + 8, "#1b2a6b", "",
                 "baseline");
    legend_entry(out, fr.px(-1.0) + 8, kMarginTop + 24, "#c22f2f", "",
                 "target");
    legend_entry(out, fr.px(-1.0) + 8, kMarginTop + 40, "#111111", "6,4",
                 "deformed baseline");
    out << "</svg>\n";
    return out.str();
}

std::string render_pc_figure(
    const Curve& template_curve,
    const std::vector<std::pair<double, Curve>>& flows, const Points& control,
    const Points& momenta, const ScaleParams& sp, const FigureOptions& opts) {
    Frame fr{static_cast<double>(opts.width), static_cast<double>(opts.height)};
    std::ostringstream out;
    out << header(opts);
    axes_for(out, fr, sp);
    path_for(out, fr, template_curve.pts, "#1b2a6b", "", "curve-template");
    double ly = kMarginTop + 8;
    legend_entry(out, fr.px(-1.0) + 8, ly, "#1b2a6b", "", "template");
    for (const auto& [mult, curve] : flows) {
        const bool neg = mult < 0.0;
        const std::string color = neg ? "#2f5fc2" : "#c22f2f";
        const std::string dash = neg ? "6,4" : "";
        char lbl[48];
        std::snprintf(lbl, sizeof(lbl), "%+g x PC", mult);
        path_for(out, fr, curve.pts, color, dash, "curve-flow");
        ly += 16;
        legend_entry(out, fr.px(-1.0) + 8, ly, color, dash, lbl);
    }
    if (momenta.rows() > 0) {
        arrows_for(out, fr, control, momenta, opts.arrow_stride,
                   opts.arrow_scale);
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace actigeo::svg
