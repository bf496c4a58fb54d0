#include "spline.hpp"

#include <cmath>
#include <sstream>

namespace actigeo {

namespace {

// Reinsch formulation: the fit solves f = y - lambda Q gamma with
// (R + lambda Q^T Q) gamma = Q^T y, where Q maps function values to second
// divided differences and R is the tridiagonal Gram matrix of the natural
// spline basis for the roughness penalty. The smoother matrix is
// S = I - lambda Q (R + lambda Q^T Q)^(-1) Q^T, so
// trace(S) = n - lambda * trace(B^(-1) Q^T Q) with B pentadiagonal.
struct BandedSystem {
    Eigen::Index n = 0, m = 0;
    VectorXd h;               // grid gaps, n-1
    VectorXd a0, a1, a2;      // bands of Q^T Q (diag, +1, +2)
    VectorXd r0, r1;          // bands of R (diag, +1)

    explicit BandedSystem(const VectorXd& x) {
        n = x.size();
        require(n >= 4, "smoothing spline: needs at least 4 grid points");
        m = n - 2;
        h = x.tail(n - 1) - x.head(n - 1);
        require((h.array() > 0.0).all(),
                "smoothing spline: grid must be strictly increasing");

        r0.resize(m);
        r1 = VectorXd::Zero(m);
        for (Eigen::Index c = 0; c < m; ++c) {
            r0(c) = (h(c) + h(c + 1)) / 3.0;
            if (c + 1 < m) r1(c) = h(c + 1) / 6.0;
        }

        // column c of Q has entries 1/h_c, -(1/h_c + 1/h_{c+1}), 1/h_{c+1}
        // at rows c, c+1, c+2
        a0.resize(m);
        a1 = VectorXd::Zero(m);
        a2 = VectorXd::Zero(m);
        for (Eigen::Index c = 0; c < m; ++c) {
            const double u = 1.0 / h(c);
            const double v = -1.0 / h(c) - 1.0 / h(c + 1);
            const double w = 1.0 / h(c + 1);
            a0(c) = u * u + v * v + w * w;
            if (c + 1 < m) {
                const double u2 = 1.0 / h(c + 1);
                const double v2 = -1.0 / h(c + 1) - 1.0 / h(c + 2);
                a1(c) = v * u2 + w * v2;
            }
            if (c + 2 < m) a2(c) = w / h(c + 2);
        }
    }

    VectorXd qty(const VectorXd& y) const {
        VectorXd out(m);
        for (Eigen::Index c = 0; c < m; ++c) {
            out(c) = y(c) / h(c) - y(c + 1) * (1.0 / h(c) + 1.0 / h(c + 1)) +
                     y(c + 2) / h(c + 1);
        }
        return out;
    }

    VectorXd q_times(const VectorXd& g) const {
        VectorXd out = VectorXd::Zero(n);
        for (Eigen::Index c = 0; c < m; ++c) {
            out(c) += g(c) / h(c);
            out(c + 1) -= g(c) * (1.0 / h(c) + 1.0 / h(c + 1));
            out(c + 2) += g(c) / h(c + 1);
        }
        return out;
    }
};

// LDL^T factorization of the pentadiagonal B = R + lambda Q^T Q.
struct BandedLdlt {
    VectorXd d, l1, l2;  // l1(i) = L(i, i-1), l2(i) = L(i, i-2)

    BandedLdlt(const BandedSystem& sys, double lambda) {
        const Eigen::Index m = sys.m;
        d.resize(m);
        l1 = VectorXd::Zero(m);
        l2 = VectorXd::Zero(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double b0 = sys.r0(i) + lambda * sys.a0(i);
            if (i >= 2) l2(i) = lambda * sys.a2(i - 2) / d(i - 2);
            if (i >= 1) {
                double b1 = sys.r1(i - 1) + lambda * sys.a1(i - 1);
                if (i >= 2) b1 -= l2(i) * d(i - 2) * l1(i - 1);
                l1(i) = b1 / d(i - 1);
            }
            double di = b0;
            if (i >= 1) di -= l1(i) * l1(i) * d(i - 1);
            if (i >= 2) di -= l2(i) * l2(i) * d(i - 2);
            require(di > 0.0, "smoothing spline: system not positive definite");
            d(i) = di;
        }
    }

    VectorXd solve(VectorXd rhs) const {
        const Eigen::Index m = d.size();
        for (Eigen::Index i = 0; i < m; ++i) {
            if (i >= 1) rhs(i) -= l1(i) * rhs(i - 1);
            if (i >= 2) rhs(i) -= l2(i) * rhs(i - 2);
        }
        rhs.array() /= d.array();
        for (Eigen::Index i = m - 1; i >= 0; --i) {
            if (i + 1 < m) rhs(i) -= l1(i + 1) * rhs(i + 1);
            if (i + 2 < m) rhs(i) -= l2(i + 2) * rhs(i + 2);
        }
        return rhs;
    }

    // In-band entries of B^(-1) via the Takahashi equations, swept bottom-up.
    void inverse_band(VectorXd& z0, VectorXd& z1, VectorXd& z2) const {
        const Eigen::Index m = d.size();
        z0.resize(m);
        z1 = VectorXd::Zero(m);
        z2 = VectorXd::Zero(m);
        for (Eigen::Index i = m - 1; i >= 0; --i) {
            if (i + 2 < m) {
                z2(i) = -(l1(i + 1) * z1(i + 1) + l2(i + 2) * z0(i + 2));
            }
            if (i + 1 < m) {
                double v = -l1(i + 1) * z0(i + 1);
                if (i + 2 < m) v -= l2(i + 2) * z1(i + 1);
                z1(i) = v;
            }
            double v = 1.0 / d(i);
            if (i + 1 < m) v -= l1(i + 1) * z1(i);
            if (i + 2 < m) v -= l2(i + 2) * z2(i);
            z0(i) = v;
        }
    }
};

double trace_at(const BandedSystem& sys, double lambda) {
    const BandedLdlt ldlt(sys, lambda);
    VectorXd z0, z1, z2;
    ldlt.inverse_band(z0, z1, z2);
    double tr = z0.dot(sys.a0);
    if (sys.m >= 2) tr += 2.0 * z1.head(sys.m - 1).dot(sys.a1.head(sys.m - 1));
    if (sys.m >= 3) tr += 2.0 * z2.head(sys.m - 2).dot(sys.a2.head(sys.m - 2));
    return static_cast<double>(sys.n) - lambda * tr;
}

VectorXd fit_at(const BandedSystem& sys, const VectorXd& y, double lambda) {
    const BandedLdlt ldlt(sys, lambda);
    const VectorXd gamma = ldlt.solve(sys.qty(y));
    return y - lambda * sys.q_times(gamma);
}

}  // namespace

VectorXd spline_fit_at(const VectorXd& x, const VectorXd& y, double lambda) {
    require(x.size() == y.size(), "smoothing spline: x and y sizes differ");
    const BandedSystem sys(x);
    return fit_at(sys, y, lambda);
}

double spline_trace_at(const VectorXd& x, double lambda) {
    const BandedSystem sys(x);
    return trace_at(sys, lambda);
}

SplineFit smooth_spline(const VectorXd& x, const VectorXd& y,
                        double target_df) {
    require(x.size() == y.size(), "smoothing spline: x and y sizes differ");
    const BandedSystem sys(x);
    require(target_df > 1.0 && target_df < static_cast<double>(sys.n),
            "smoothing spline: target_df must lie in (1, n)");

    double lo = -12.0, hi = 6.0;  // log10 lambda
    const double df_hi = trace_at(sys, std::pow(10.0, lo));
    const double df_lo = trace_at(sys, std::pow(10.0, hi));
    if (target_df > df_hi || target_df < df_lo) {
        std::ostringstream msg;
        msg << "smoothing spline: target df " << target_df
            << " outside achievable range [" << df_lo << ", " << df_hi
            << "] for lambda in [1e-12, 1e6]";
        fail_runtime(msg.str());
    }

    double lambda = std::pow(10.0, 0.5 * (lo + hi));
    double df = trace_at(sys, lambda);
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        lambda = std::pow(10.0, mid);
        df = trace_at(sys, lambda);
        if (std::abs(df - target_df) <= 1e-3) break;
        if (df > target_df) lo = mid;  // trace decreases in lambda
        else hi = mid;
    }
    if (std::abs(df - target_df) > 0.1) {
        std::ostringstream msg;
        msg << "smoothing spline: df search stalled at achieved df " << df
            << " for target " << target_df;
        fail_runtime(msg.str());
    }

    SplineFit fit;
    fit.fitted = fit_at(sys, y, lambda);
    fit.lambda = lambda;
    fit.df = df;
    return fit;
}

}  // namespace actigeo
