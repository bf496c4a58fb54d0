#pragma once

#include "curve.hpp"
#include "shooting.hpp"

#include "json.hpp"

#include <string>
#include <vector>

namespace actigeo {

// Stacked per-subject vectors under the Frobenius inner product. For momenta
// each row is the x-block followed by the y-block (length 2 n_g); the grid
// holds the shared control points. Also reused for generic vector PCA (e.g.
// vertical magnitude differences), in which case the grid may be empty.
struct MomentaMatrix {
    MatrixXd rows;
    std::vector<std::string> subject_ids;
    Points grid;

    void validate() const;
};

struct PCModel {
    VectorXd mean;
    MatrixXd components;  // row l = sd_l * u_l, so stored scores have unit SD
    VectorXd score_sd;    // sd_l of the raw projections
    VectorXd eigenvalues; // variance of raw projections per component
    MatrixXd scores;      // subjects x n_pc, unit-SD columns
    VectorXd var_explained;
    VectorXd cum_var_explained;
    Points grid;
    std::vector<std::string> subject_ids;

    int n_pc() const { return static_cast<int>(components.rows()); }
};

// Mean-subtracted SVD; component sign fixed so the largest-magnitude entry is
// positive. Scores use the population SD convention (divide by n).
PCModel fit_pca(const MomentaMatrix& data, int n_pc);

// Projection scores of one stacked vector.
VectorXd project(const VectorXd& row, const PCModel& model);
VectorXd project_momenta(const MomentaField& m, const PCModel& model);

VectorXd momenta_to_vector(const Points& p);
Points momenta_from_vector(const VectorXd& v);

// Shoots mean + c * component_l (component 0-based) from the template's
// control grid and returns the deformed template per multiplier.
std::vector<Curve> pc_flow_curves(const PCModel& model, int component,
                                  const Curve& template_curve,
                                  const std::vector<double>& multipliers,
                                  int n_steps, double sigma_v);

nlohmann::json pc_model_to_json(const PCModel& model);
PCModel pc_model_from_json(const nlohmann::json& j);

}  // namespace actigeo
