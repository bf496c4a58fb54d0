#include "stats.hpp"

#include "csv.hpp"
#include "rng.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace actigeo::stats {

namespace {

double two_sided_p(double t, double df) {
    if (!std::isfinite(t)) return 0.0;
    const boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

double soft_threshold(double z, double g) {
    if (z > g) return z - g;
    if (z < -g) return z + g;
    return 0.0;
}

struct Standardized {
    MatrixXd X;          // centered/scaled columns; constant columns zeroed
    VectorXd mean, sd;   // population moments per column
    VectorXd yc;
    double ybar = 0.0;
    std::vector<bool> active;  // false for constant columns
};

Standardized standardize(const MatrixXd& X, const VectorXd& y) {
    Standardized s;
    const Eigen::Index n = X.rows(), p = X.cols();
    s.mean = X.colwise().mean();
    s.X = X.rowwise() - s.mean.transpose();
    s.sd.resize(p);
    s.active.assign(p, true);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double v = s.X.col(j).squaredNorm() / static_cast<double>(n);
        s.sd(j) = std::sqrt(v);
        if (s.sd(j) > 1e-12) {
            s.X.col(j) /= s.sd(j);
        } else {
            s.X.col(j).setZero();
            s.active[j] = false;
        }
    }
    s.ybar = y.mean();
    s.yc = y.array() - s.ybar;
    return s;
}

// coordinate descent at one lambda, warm-started from beta
void cd_fit(const MatrixXd& X, const VectorXd& yc, double lambda,
            const VectorXd& penalty, const std::vector<bool>& active,
            VectorXd& beta, VectorXd& resid) {
    const Eigen::Index n = X.rows(), p = X.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int sweep = 0; sweep < 2000; ++sweep) {
        double max_delta = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (!active[j]) continue;
            const double old = beta(j);
            const double z = old + X.col(j).dot(resid) * inv_n;
            const double next = soft_threshold(z, lambda * penalty(j));
            if (next != old) {
                resid -= (next - old) * X.col(j);
                beta(j) = next;
                max_delta = std::max(max_delta, std::abs(next - old));
            }
        }
        if (max_delta < 1e-11) break;
    }
}

}  // namespace

void DesignMatrix::validate() const {
    require(X.rows() == y.size(), "design: X rows must match y length");
    require(X.cols() == static_cast<Eigen::Index>(names.size()),
            "design: X columns must match names");
    require(X.allFinite() && y.allFinite(), "design: values must be finite");
    std::set<std::string> seen(names.begin(), names.end());
    require(seen.size() == names.size(), "design: column names must be unique");
}

LassoFit fit_lasso_cv(const DesignMatrix& dm, int folds, std::uint64_t seed,
                      bool one_se_rule,
                      const std::vector<std::string>& penalty_free) {
    dm.validate();
    const Eigen::Index n = dm.X.rows(), p = dm.X.cols();
    require(folds >= 2 && n >= folds, "lasso: need n >= folds >= 2");
    {
        const double yvar =
            (dm.y.array() - dm.y.mean()).square().sum() / static_cast<double>(n);
        require(yvar > 1e-24, "lasso: response is constant");
    }

    LassoFit fit;
    fit.names = dm.names;

    VectorXd penalty = VectorXd::Ones(p);
    for (const std::string& name : penalty_free) {
        const auto it = std::find(dm.names.begin(), dm.names.end(), name);
        require(it != dm.names.end(), "lasso: unknown forced-in column " + name);
        penalty(it - dm.names.begin()) = 0.0;
    }

    const Standardized full = standardize(dm.X, dm.y);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (!full.active[j]) {
            fit.notes.push_back("column " + dm.names[j] +
                                " is constant; excluded from selection");
        }
    }

    // lambda grid from the smallest value that zeroes every penalized column
    double lambda_max = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (penalty(j) > 0.0 && full.active[j]) {
            lambda_max = std::max(
                lambda_max, std::abs(full.X.col(j).dot(full.yc)) /
                                static_cast<double>(n));
        }
    }
    require(lambda_max > 0.0, "lasso: no penalized non-constant columns");
    const int n_lambda = 100;
    fit.lambda_path.resize(n_lambda);
    for (int k = 0; k < n_lambda; ++k) {
        fit.lambda_path(k) =
            lambda_max * std::pow(1e-4, k / static_cast<double>(n_lambda - 1));
    }

    // seeded fold assignment
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(seed, 0xf01d5));
    rng.shuffle(order);
    fit.fold_assignment.assign(n, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        fit.fold_assignment[order[i]] = static_cast<int>(i % folds);
    }

    // cross-validated squared error along the path
    MatrixXd fold_mse = MatrixXd::Zero(folds, n_lambda);
    for (int f = 0; f < folds; ++f) {
        std::vector<int> train, test;
        for (Eigen::Index i = 0; i < n; ++i) {
            (fit.fold_assignment[i] == f ? test : train).push_back(
                static_cast<int>(i));
        }
        MatrixXd Xtr(train.size(), p);
        VectorXd ytr(train.size());
        for (std::size_t i = 0; i < train.size(); ++i) {
            Xtr.row(static_cast<Eigen::Index>(i)) = dm.X.row(train[i]);
            ytr(static_cast<Eigen::Index>(i)) = dm.y(train[i]);
        }
        const Standardized st = standardize(Xtr, ytr);
        VectorXd beta = VectorXd::Zero(p);
        VectorXd resid = st.yc;
        for (int k = 0; k < n_lambda; ++k) {
            cd_fit(st.X, st.yc, fit.lambda_path(k), penalty, st.active, beta,
                   resid);
            double sse = 0.0;
            for (int i : test) {
                double pred = st.ybar;
                for (Eigen::Index j = 0; j < p; ++j) {
                    if (beta(j) != 0.0) {
                        pred += beta(j) * (dm.X(i, j) - st.mean(j)) / st.sd(j);
                    }
                }
                const double e = dm.y(i) - pred;
                sse += e * e;
            }
            fold_mse(f, k) += sse / static_cast<double>(test.size());
        }
    }
    fit.cv_mse = fold_mse.colwise().mean();
    fit.cv_se.resize(n_lambda);
    for (int k = 0; k < n_lambda; ++k) {
        const double var =
            (fold_mse.col(k).array() - fit.cv_mse(k)).square().sum() /
            static_cast<double>(folds - 1);
        fit.cv_se(k) = std::sqrt(var / folds);
    }

    int k_min = 0;
    fit.cv_mse.minCoeff(&k_min);
    fit.lambda_min = fit.lambda_path(k_min);
    int k_1se = k_min;
    for (int k = 0; k <= k_min; ++k) {
        if (fit.cv_mse(k) <= fit.cv_mse(k_min) + fit.cv_se(k_min)) {
            k_1se = k;
            break;
        }
    }
    fit.lambda_1se = fit.lambda_path(k_1se);
    fit.lambda_used = one_se_rule ? fit.lambda_1se : fit.lambda_min;

    // final fit on the full data, path down to the chosen lambda
    VectorXd beta = VectorXd::Zero(p);
    VectorXd resid = full.yc;
    const int k_used = one_se_rule ? k_1se : k_min;
    for (int k = 0; k <= k_used; ++k) {
        cd_fit(full.X, full.yc, fit.lambda_path(k), penalty, full.active, beta,
               resid);
    }

    // KKT residual of the standardized problem
    double kkt = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (!full.active[j]) continue;
        const double gj = full.X.col(j).dot(resid) * inv_n;
        const double lam_j = fit.lambda_used * penalty(j);
        if (beta(j) != 0.0) {
            kkt = std::max(kkt, std::abs(gj - lam_j * (beta(j) > 0 ? 1 : -1)));
        } else {
            kkt = std::max(kkt, std::max(0.0, std::abs(gj) - lam_j));
        }
    }
    fit.kkt_residual = kkt;

    fit.coefficients = VectorXd::Zero(p);
    double intercept = full.ybar;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (beta(j) != 0.0) {
            fit.coefficients(j) = beta(j) / full.sd(j);
            intercept -= fit.coefficients(j) * full.mean(j);
            fit.selected.push_back(static_cast<int>(j));
        }
    }
    fit.intercept = intercept;
    return fit;
}

OlsFit fit_ols(const DesignMatrix& dm) {
    dm.validate();
    const Eigen::Index n = dm.X.rows(), p = dm.X.cols();

    MatrixXd X(n, p + 1);
    X.col(0).setOnes();
    X.rightCols(p) = dm.X;

    Eigen::ColPivHouseholderQR<MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < p + 1) {
        // pivots beyond the numerical rank point at the dependent columns
        std::ostringstream msg;
        msg << "ols: design is rank deficient; collinear columns:";
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index k = qr.rank(); k < p + 1; ++k) {
            const Eigen::Index col = perm(k);
            msg << ' ' << (col == 0 ? "(Intercept)" : dm.names[col - 1]);
        }
        fail_validation(msg.str());
    }
    require(n > p + 1, "ols: need more observations than coefficients");

    OlsFit fit;
    fit.names.push_back("(Intercept)");
    fit.names.insert(fit.names.end(), dm.names.begin(), dm.names.end());
    fit.coef = qr.solve(dm.y);

    const VectorXd resid = dm.y - X * fit.coef;
    fit.df_resid = n - (p + 1);
    fit.sigma2 = resid.squaredNorm() / static_cast<double>(fit.df_resid);
    const double tss = (dm.y.array() - dm.y.mean()).square().sum();
    fit.r_squared = tss > 0.0 ? 1.0 - resid.squaredNorm() / tss : 0.0;

    const MatrixXd xtx_inv = (X.transpose() * X).inverse();
    fit.se.resize(p + 1);
    fit.tstat.resize(p + 1);
    fit.pvalue.resize(p + 1);
    for (Eigen::Index j = 0; j <= p; ++j) {
        fit.se(j) = std::sqrt(std::max(0.0, fit.sigma2 * xtx_inv(j, j)));
        fit.tstat(j) = fit.se(j) > 0.0
                           ? fit.coef(j) / fit.se(j)
                           : (fit.coef(j) == 0.0
                                  ? 0.0
                                  : std::numeric_limits<double>::infinity());
        fit.pvalue(j) =
            two_sided_p(fit.tstat(j), static_cast<double>(fit.df_resid));
    }
    return fit;
}

BSplineBasis::BSplineBasis(double a, double b, int n_basis)
    : n_basis_(n_basis) {
    require(n_basis >= 1, "bspline: need at least one basis function");
    require(b > a, "bspline: domain must be nonempty");
    order_ = std::min(4, n_basis);
    const int n_interior = n_basis - order_;
    knots_.resize(n_basis + order_);
    for (int i = 0; i < order_; ++i) knots_(i) = a;
    for (int i = 0; i < n_interior; ++i) {
        knots_(order_ + i) =
            a + (b - a) * (i + 1) / static_cast<double>(n_interior + 1);
    }
    for (int i = 0; i < order_; ++i) knots_(n_basis + i) = b;
}

VectorXd BSplineBasis::eval(double t) const {
    VectorXd out = VectorXd::Zero(n_basis_);
    const double a = knots_(0), b = knots_(knots_.size() - 1);
    t = std::clamp(t, a, b);

    // Cox-de Boor triangle on the span containing t
    int span = order_ - 1;  // index with knots_(span) <= t < knots_(span+1)
    while (span < n_basis_ - 1 && t >= knots_(span + 1)) ++span;

    std::vector<double> vals(order_, 0.0);
    vals[0] = 1.0;
    for (int k = 2; k <= order_; ++k) {
        double saved = 0.0;
        for (int r = 0; r < k - 1; ++r) {
            const int i = span - k + 2 + r;
            const double den = knots_(i + k - 1) - knots_(i);
            const double term = den > 0.0 ? vals[r] / den : 0.0;
            vals[r] = saved + (knots_(i + k - 1) - t) * term;
            saved = (t - knots_(i)) * term;
        }
        vals[k - 1] = saved;
    }
    for (int r = 0; r < order_; ++r) {
        const int idx = span - order_ + 1 + r;
        if (idx >= 0 && idx < n_basis_) out(idx) = vals[r];
    }
    return out;
}

MatrixXd BSplineBasis::eval_matrix(const VectorXd& ts) const {
    MatrixXd out(ts.size(), n_basis_);
    for (Eigen::Index i = 0; i < ts.size(); ++i) {
        out.row(i) = eval(ts(i)).transpose();
    }
    return out;
}

namespace {

MatrixXd second_difference_penalty(int k) {
    if (k < 3) return MatrixXd::Zero(k, k);
    MatrixXd d = MatrixXd::Zero(k - 2, k);
    for (int i = 0; i < k - 2; ++i) {
        d(i, i) = 1.0;
        d(i, i + 1) = -2.0;
        d(i, i + 2) = 1.0;
    }
    return d.transpose() * d;
}

VectorXd trapezoid_weights(const VectorXd& grid) {
    const Eigen::Index m = grid.size();
    VectorXd w = VectorXd::Zero(m);
    for (Eigen::Index i = 0; i + 1 < m; ++i) {
        const double h = grid(i + 1) - grid(i);
        w(i) += 0.5 * h;
        w(i + 1) += 0.5 * h;
    }
    return w;
}

}  // namespace

FunctionalFit fit_functional_regression(const MatrixXd& mx, const MatrixXd& my,
                                        const VectorXd& grid, const MatrixXd& Z,
                                        const std::vector<std::string>& z_names,
                                        const VectorXd& y, int n_basis) {
    const Eigen::Index n = y.size();
    const Eigen::Index g = grid.size();
    require(mx.rows() == n && my.rows() == n,
            "functional regression: momenta rows must match y");
    require(mx.cols() == g && my.cols() == g,
            "functional regression: momenta grids must match the time grid");
    require(Z.rows() == n || Z.size() == 0,
            "functional regression: covariate rows must match y");
    require(static_cast<Eigen::Index>(z_names.size()) == Z.cols(),
            "functional regression: covariate names must match columns");
    require(n_basis >= 1, "functional regression: n_basis must be >= 1");

    const Eigen::Index qz = Z.cols();
    const BSplineBasis basis(grid(0), grid(g - 1), n_basis);
    const MatrixXd bmat = basis.eval_matrix(grid);  // g x K
    const VectorXd w = trapezoid_weights(grid);

    const MatrixXd fx = (mx.array().rowwise() * w.transpose().array()).matrix() * bmat;
    const MatrixXd fy = (my.array().rowwise() * w.transpose().array()).matrix() * bmat;

    const Eigen::Index K = n_basis;
    const Eigen::Index ptot = 1 + qz + 2 * K;
    MatrixXd X(n, ptot);
    X.col(0).setOnes();
    if (qz > 0) X.middleCols(1, qz) = Z;
    X.middleCols(1 + qz, K) = fx;
    X.middleCols(1 + qz + K, K) = fy;

    const MatrixXd xtx = X.transpose() * X;
    const VectorXd xty = X.transpose() * y;
    const MatrixXd pen1 = second_difference_penalty(static_cast<int>(K));

    // small ridge keeps the functional blocks identified when the data carry
    // no signal there (e.g. all-zero momenta)
    const double ridge = 1e-10 * std::max(1.0, xtx.diagonal().maxCoeff());

    const auto assemble = [&](double lx, double ly) {
        MatrixXd a = xtx;
        a.block(1 + qz, 1 + qz, K, K) += lx * pen1;
        a.block(1 + qz + K, 1 + qz + K, K, K) += ly * pen1;
        a.diagonal().tail(2 * K).array() += ridge;
        return a;
    };

    // GCV over a log grid of per-coordinate penalties
    double best_gcv = std::numeric_limits<double>::infinity();
    double best_lx = 1.0, best_ly = 1.0;
    for (int ix = 0; ix < 25; ++ix) {
        const double lx = std::pow(10.0, -4.0 + 0.5 * ix);
        for (int iy = 0; iy < 25; ++iy) {
            const double ly = std::pow(10.0, -4.0 + 0.5 * iy);
            const MatrixXd a = assemble(lx, ly);
            Eigen::LDLT<MatrixXd> ldlt(a);
            if (ldlt.info() != Eigen::Success) continue;
            const VectorXd b = ldlt.solve(xty);
            const double rss = (y - X * b).squaredNorm();
            const double edf = ldlt.solve(xtx).trace();
            const double denom = static_cast<double>(n) - edf;
            if (denom <= 1.0) continue;
            const double gcv = static_cast<double>(n) * rss / (denom * denom);
            if (gcv < best_gcv) {
                best_gcv = gcv;
                best_lx = lx;
                best_ly = ly;
            }
        }
    }
    require(std::isfinite(best_gcv),
            "functional regression: degenerate penalty system (unpenalized "
            "directions meet or exceed the sample size)");

    const MatrixXd a = assemble(best_lx, best_ly);
    Eigen::LDLT<MatrixXd> ldlt(a);
    require(ldlt.info() == Eigen::Success,
            "functional regression: degenerate penalty system");
    const VectorXd b = ldlt.solve(xty);
    const MatrixXd a_inv_xtx = ldlt.solve(xtx);
    const double edf = a_inv_xtx.trace();
    const double rss = (y - X * b).squaredNorm();
    const double df_resid = std::max(1.0, static_cast<double>(n) - edf);
    const double sigma2 = rss / df_resid;
    // sandwich covariance of the penalized estimate
    const MatrixXd cov = sigma2 * ldlt.solve(a_inv_xtx.transpose());

    FunctionalFit fit;
    fit.grid = grid;
    fit.lambda_x = best_lx;
    fit.lambda_y = best_ly;
    fit.gcv = best_gcv;
    fit.edf = edf;
    fit.sigma2 = sigma2;

    const VectorXd bx = b.segment(1 + qz, K);
    const VectorXd by = b.segment(1 + qz + K, K);
    fit.beta_x = bmat * bx;
    fit.beta_y = bmat * by;
    const MatrixXd cov_x = cov.block(1 + qz, 1 + qz, K, K);
    const MatrixXd cov_y = cov.block(1 + qz + K, 1 + qz + K, K, K);
    fit.beta_x_lo.resize(g);
    fit.beta_x_hi.resize(g);
    fit.beta_y_lo.resize(g);
    fit.beta_y_hi.resize(g);
    for (Eigen::Index i = 0; i < g; ++i) {
        const VectorXd bi = bmat.row(i).transpose();
        const double sx = std::sqrt(std::max(0.0, double(bi.dot(cov_x * bi))));
        const double sy = std::sqrt(std::max(0.0, double(bi.dot(cov_y * bi))));
        fit.beta_x_lo(i) = fit.beta_x(i) - 1.96 * sx;
        fit.beta_x_hi(i) = fit.beta_x(i) + 1.96 * sx;
        fit.beta_y_lo(i) = fit.beta_y(i) - 1.96 * sy;
        fit.beta_y_hi(i) = fit.beta_y(i) + 1.96 * sy;
    }

    fit.scalar_names.push_back("(Intercept)");
    fit.scalar_names.insert(fit.scalar_names.end(), z_names.begin(),
                            z_names.end());
    fit.scalar_coef = b.head(1 + qz);
    fit.scalar_se.resize(1 + qz);
    fit.scalar_pvalue.resize(1 + qz);
    for (Eigen::Index j = 0; j < 1 + qz; ++j) {
        fit.scalar_se(j) = std::sqrt(std::max(0.0, cov(j, j)));
        const double t = fit.scalar_se(j) > 0.0
                             ? fit.scalar_coef(j) / fit.scalar_se(j)
                             : 0.0;
        fit.scalar_pvalue(j) = two_sided_p(t, df_resid);
    }
    return fit;
}

nlohmann::json lasso_to_json(const LassoFit& fit) {
    std::vector<double> path(fit.lambda_path.data(),
                             fit.lambda_path.data() + fit.lambda_path.size());
    std::vector<double> mse(fit.cv_mse.data(),
                            fit.cv_mse.data() + fit.cv_mse.size());
    std::vector<double> se(fit.cv_se.data(),
                           fit.cv_se.data() + fit.cv_se.size());
    nlohmann::json coef = nlohmann::json::object();
    for (std::size_t j = 0; j < fit.names.size(); ++j) {
        coef[fit.names[j]] = fit.coefficients(static_cast<Eigen::Index>(j));
    }
    std::vector<std::string> selected;
    for (int j : fit.selected) selected.push_back(fit.names[j]);
    return {{"lambda_path", path},
            {"cv_mse", mse},
            {"cv_se", se},
            {"lambda_min", fit.lambda_min},
            {"lambda_1se", fit.lambda_1se},
            {"lambda_used", fit.lambda_used},
            {"intercept", fit.intercept},
            {"coefficients", coef},
            {"selected", selected},
            {"fold_assignment", fit.fold_assignment},
            {"kkt_residual", fit.kkt_residual},
            {"notes", fit.notes}};
}

nlohmann::json ols_to_json(const OlsFit& fit) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t j = 0; j < fit.names.size(); ++j) {
        const auto i = static_cast<Eigen::Index>(j);
        rows.push_back({{"covariate", fit.names[j]},
                        {"estimate", fit.coef(i)},
                        {"se", fit.se(i)},
                        {"t", fit.tstat(i)},
                        {"p_value", fit.pvalue(i)}});
    }
    return {{"coefficients", rows},
            {"sigma2", fit.sigma2},
            {"df_resid", fit.df_resid},
            {"r_squared", fit.r_squared}};
}

void write_ols_csv(const OlsFit& fit, std::ostream& out) {
    csv::write_row(out, {"covariate", "estimate", "se", "p_value"});
    for (std::size_t j = 0; j < fit.names.size(); ++j) {
        const auto i = static_cast<Eigen::Index>(j);
        csv::write_row(out, {fit.names[j], csv::format_full(fit.coef(i)),
                             csv::format_full(fit.se(i)),
                             csv::format_full(fit.pvalue(i))});
    }
}

nlohmann::json functional_to_json(const FunctionalFit& fit) {
    const auto vec = [](const VectorXd& v) {
        return std::vector<double>(v.data(), v.data() + v.size());
    };
    nlohmann::json scalars = nlohmann::json::array();
    for (std::size_t j = 0; j < fit.scalar_names.size(); ++j) {
        const auto i = static_cast<Eigen::Index>(j);
        scalars.push_back({{"covariate", fit.scalar_names[j]},
                           {"estimate", fit.scalar_coef(i)},
                           {"se", fit.scalar_se(i)},
                           {"p_value", fit.scalar_pvalue(i)}});
    }
    return {{"grid", vec(fit.grid)},
            {"beta_x", vec(fit.beta_x)},
            {"beta_x_lo", vec(fit.beta_x_lo)},
            {"beta_x_hi", vec(fit.beta_x_hi)},
            {"beta_y", vec(fit.beta_y)},
            {"beta_y_lo", vec(fit.beta_y_lo)},
            {"beta_y_hi", vec(fit.beta_y_hi)},
            {"scalars", scalars},
            {"lambda_x", fit.lambda_x},
            {"lambda_y", fit.lambda_y},
            {"gcv", fit.gcv},
            {"edf", fit.edf}};
}

void write_functional_csv(const FunctionalFit& fit, std::ostream& out) {
    csv::write_row(out, {"t", "beta_x", "beta_x_lo", "beta_x_hi", "beta_y",
                         "beta_y_lo", "beta_y_hi"});
    for (Eigen::Index i = 0; i < fit.grid.size(); ++i) {
        csv::write_row(out, {csv::format_full(fit.grid(i)),
                             csv::format_full(fit.beta_x(i)),
                             csv::format_full(fit.beta_x_lo(i)),
                             csv::format_full(fit.beta_x_hi(i)),
                             csv::format_full(fit.beta_y(i)),
                             csv::format_full(fit.beta_y_lo(i)),
                             csv::format_full(fit.beta_y_hi(i))});
    }
}

CovariateTable read_covariates_csv(std::istream& in) {
    csv::Reader reader(in);
    std::vector<std::string> fields;
    require(reader.next(fields) && !fields.empty(),
            "covariates csv: empty input");
    require(fields[0] == "subject_id",
            "covariates csv: first column must be subject_id");
    CovariateTable table;
    table.columns.assign(fields.begin() + 1, fields.end());
    while (reader.next(fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() != table.columns.size() + 1) {
            fail_validation("covariates csv, line " +
                            std::to_string(reader.record_line()) +
                            ": wrong field count");
        }
        table.subject_ids.push_back(fields[0]);
        table.cells.emplace_back(fields.begin() + 1, fields.end());
    }
    return table;
}

CovariateTable read_covariates_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_validation("covariates csv: cannot open " + path);
    return read_covariates_csv(in);
}

BuiltDesign build_design(const CovariateTable& table,
                         const std::vector<std::string>& exclude) {
    const std::size_t n = table.subject_ids.size();
    require(n > 0, "covariates: no rows");
    BuiltDesign out;
    std::vector<VectorXd> cols;

    const auto is_missing = [](const std::string& s) {
        return s.empty() || s == "NA" || s == "na";
    };

    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        const std::string& name = table.columns[c];
        if (std::find(exclude.begin(), exclude.end(), name) != exclude.end()) {
            continue;
        }
        std::size_t n_missing = 0;
        bool numeric = true;
        std::vector<double> values(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::string& cell = table.cells[i][c];
            if (is_missing(cell)) {
                ++n_missing;
                continue;
            }
            char* end = nullptr;
            values[i] = std::strtod(cell.c_str(), &end);
            if (end != cell.c_str() + cell.size()) numeric = false;
        }
        if (static_cast<double>(n_missing) > 0.05 * static_cast<double>(n)) {
            out.notes.push_back("dropped " + name + ": " +
                                std::to_string(n_missing) + " missing (> 5%)");
            continue;
        }

        if (numeric) {
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (!is_missing(table.cells[i][c])) sum += values[i];
            }
            const double mean =
                n_missing < n ? sum / static_cast<double>(n - n_missing) : 0.0;
            VectorXd col(n);
            for (std::size_t i = 0; i < n; ++i) {
                col(static_cast<Eigen::Index>(i)) =
                    is_missing(table.cells[i][c]) ? mean : values[i];
            }
            if (n_missing > 0) {
                out.notes.push_back("imputed " + name + ": " +
                                    std::to_string(n_missing) +
                                    " missing values set to the column mean");
            }
            cols.push_back(col);
            out.names.push_back(name);
        } else {
            std::vector<std::string> level_of(n);
            std::set<std::string> levels;
            for (std::size_t i = 0; i < n; ++i) {
                const std::string& cell = table.cells[i][c];
                level_of[i] = is_missing(cell) ? "no" : cell;
                levels.insert(level_of[i]);
            }
            if (n_missing > 0) {
                out.notes.push_back("imputed " + name + ": " +
                                    std::to_string(n_missing) +
                                    " missing values set to \"no\"");
            }
            if (levels.size() < 2) {
                out.notes.push_back("dropped " + name +
                                    ": single level after imputation");
                continue;
            }
            // first sorted level is the reference
            bool first = true;
            for (const std::string& level : levels) {
                if (first) {
                    first = false;
                    continue;
                }
                VectorXd col(n);
                for (std::size_t i = 0; i < n; ++i) {
                    col(static_cast<Eigen::Index>(i)) =
                        level_of[i] == level ? 1.0 : 0.0;
                }
                cols.push_back(col);
                out.names.push_back(name + "=" + level);
            }
        }
    }

    out.X.resize(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        out.X.col(static_cast<Eigen::Index>(j)) = cols[j];
    }
    return out;
}

}  // namespace actigeo::stats
