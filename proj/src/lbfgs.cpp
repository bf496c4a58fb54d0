#include "lbfgs.hpp"

#include <cmath>
#include <deque>

namespace actigeo {

namespace {

struct Pair {
    VectorXd s, y;
    double rho;
};

// Two-loop recursion; H0 scaled by the last curvature pair.
VectorXd apply_inverse_hessian(const std::deque<Pair>& hist,
                               const VectorXd& grad) {
    VectorXd q = grad;
    std::vector<double> alpha(hist.size());
    for (std::size_t i = hist.size(); i-- > 0;) {
        alpha[i] = hist[i].rho * hist[i].s.dot(q);
        q -= alpha[i] * hist[i].y;
    }
    if (!hist.empty()) {
        const Pair& last = hist.back();
        q *= last.s.dot(last.y) / last.y.squaredNorm();
    }
    for (std::size_t i = 0; i < hist.size(); ++i) {
        const double beta = hist[i].rho * hist[i].y.dot(q);
        q += (alpha[i] - beta) * hist[i].s;
    }
    return q;
}

}  // namespace

LbfgsReport lbfgs_minimize(const ObjectiveFn& fn, VectorXd x0,
                           const LbfgsOptions& opts) {
    LbfgsReport rep;
    const Eigen::Index n = x0.size();
    VectorXd x = std::move(x0);
    VectorXd grad(n);
    double f = fn(x, grad);

    rep.trace.push_back(f);
    rep.x = x;
    rep.grad = grad;
    rep.f = f;

    std::deque<Pair> hist;
    for (int iter = 0; iter < opts.max_iters; ++iter) {
        if (grad.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
            rep.converged = true;
            break;
        }

        VectorXd dir = -apply_inverse_hessian(hist, grad);
        double slope = grad.dot(dir);
        if (!(slope < 0.0) || !dir.allFinite()) {
            // fall back to steepest descent when the model direction is bad
            dir = -grad;
            slope = grad.dot(dir);
            hist.clear();
        }
        if (hist.empty()) {
            // unit-length first step keeps the iterates invariant under
            // rescaling of the objective
            const double dinf = dir.lpNorm<Eigen::Infinity>();
            if (dinf > 0.0) {
                dir /= dinf;
                slope /= dinf;
            }
        }

        double step = 1.0;
        VectorXd x_new(n), grad_new(n);
        double f_new = f;
        bool accepted = false;
        for (int ls = 0; ls < opts.max_line_search; ++ls) {
            x_new = x + step * dir;
            f_new = fn(x_new, grad_new);
            if (std::isfinite(f_new) &&
                f_new <= f + opts.armijo_c * step * slope) {
                accepted = true;
                break;
            }
            step *= opts.backtrack;
        }
        if (!accepted) {
            rep.line_search_failed = true;
            break;
        }

        const VectorXd s = x_new - x;
        const VectorXd y = grad_new - grad;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            hist.push_back(Pair{s, y, 1.0 / sy});
            if (static_cast<int>(hist.size()) > opts.history) hist.pop_front();
        }

        x = std::move(x_new);
        grad = std::move(grad_new);
        f = f_new;
        rep.iterations = iter + 1;
        rep.trace.push_back(f);
        if (f <= rep.f) {
            rep.f = f;
            rep.x = x;
            rep.grad = grad;
        }
    }
    if (!rep.converged && grad.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
        rep.converged = true;
    }
    return rep;
}

}  // namespace actigeo
