#pragma once

#include "common.hpp"

#include "json.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace actigeo::stats {

struct DesignMatrix {
    MatrixXd X;
    std::vector<std::string> names;
    VectorXd y;

    void validate() const;
};

struct LassoFit {
    std::vector<std::string> names;
    VectorXd coefficients;  // original scale
    double intercept = 0.0;
    std::vector<int> selected;  // indices with nonzero coefficient
    VectorXd lambda_path;
    VectorXd cv_mse;
    VectorXd cv_se;
    double lambda_min = 0.0;
    double lambda_1se = 0.0;
    double lambda_used = 0.0;
    std::vector<int> fold_assignment;
    double kkt_residual = 0.0;  // on the standardized problem at lambda_used
    std::vector<std::string> notes;
};

// Coordinate-descent Lasso over a log-spaced lambda grid with k-fold
// cross-validation; lambda_min minimizes CV mean squared error, the
// one-standard-error choice is available behind the flag. Columns are
// standardized internally and coefficients reported on the original scale.
// Names in `penalty_free` are left unpenalized (forced-in covariates).
LassoFit fit_lasso_cv(const DesignMatrix& dm, int folds = 10,
                      std::uint64_t seed = 0, bool one_se_rule = false,
                      const std::vector<std::string>& penalty_free = {});

struct OlsFit {
    std::vector<std::string> names;  // includes "(Intercept)"
    VectorXd coef;
    VectorXd se;
    VectorXd tstat;
    VectorXd pvalue;
    double sigma2 = 0.0;
    long df_resid = 0;
    double r_squared = 0.0;
};

// Least squares with classical standard errors, t statistics and two-sided
// p-values; errors on rank deficiency naming the collinear columns.
OlsFit fit_ols(const DesignMatrix& dm);

struct FunctionalFit {
    VectorXd grid;  // evaluation grid (clock time)
    VectorXd beta_x, beta_x_lo, beta_x_hi;
    VectorXd beta_y, beta_y_lo, beta_y_hi;
    std::vector<std::string> scalar_names;  // "(Intercept)" + covariates
    VectorXd scalar_coef, scalar_se, scalar_pvalue;
    double lambda_x = 0.0, lambda_y = 0.0;
    double gcv = 0.0;
    double edf = 0.0;
    double sigma2 = 0.0;
};

// Scalar-on-function regression of y on the momenta coordinate fields:
//   y = a0 + Z a + \int bx(t) mx(t) dt + \int by(t) my(t) dt + e
// The coefficient functions use cubic B-spline bases with second-difference
// roughness penalties; penalties are chosen by generalized cross-validation
// and integrals discretized by the trapezoid rule. Z may have zero columns.
FunctionalFit fit_functional_regression(const MatrixXd& mx, const MatrixXd& my,
                                        const VectorXd& grid, const MatrixXd& Z,
                                        const std::vector<std::string>& z_names,
                                        const VectorXd& y, int n_basis = 30);

nlohmann::json lasso_to_json(const LassoFit& fit);
nlohmann::json ols_to_json(const OlsFit& fit);
void write_ols_csv(const OlsFit& fit, std::ostream& out);
nlohmann::json functional_to_json(const FunctionalFit& fit);
void write_functional_csv(const FunctionalFit& fit, std::ostream& out);

// --- covariate table -> numeric design -------------------------------------

struct CovariateTable {
    std::vector<std::string> columns;  // excluding subject_id
    std::vector<std::string> subject_ids;
    std::vector<std::vector<std::string>> cells;  // row-major, columns order
};

CovariateTable read_covariates_csv(std::istream& in);
CovariateTable read_covariates_csv(const std::string& path);

struct BuiltDesign {
    MatrixXd X;
    std::vector<std::string> names;
    std::vector<std::string> notes;  // drop/impute decisions, one per event
};

// Numeric design from a raw table: columns with > 5% missing are dropped;
// categorical columns with <= 5% missing are imputed to "no", numeric ones
// to the column mean; categorical columns expand to dummies against the
// first (sorted) level.
BuiltDesign build_design(const CovariateTable& table,
                         const std::vector<std::string>& exclude = {});

// Cubic B-spline basis on clamped uniform knots; n_basis >= 4 gives cubics,
// smaller values fall back to lower order (n_basis = 1 is the constant).
class BSplineBasis {
public:
    BSplineBasis(double a, double b, int n_basis);
    int size() const { return n_basis_; }
    VectorXd eval(double t) const;
    MatrixXd eval_matrix(const VectorXd& ts) const;

private:
    int n_basis_;
    int order_;
    VectorXd knots_;
};

}  // namespace actigeo::stats
