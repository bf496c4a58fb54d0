#include "fpca.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace actigeo {

void MomentaMatrix::validate() const {
    require(rows.rows() >= 2, "fpca: needs at least 2 subjects");
    require(subject_ids.size() == static_cast<std::size_t>(rows.rows()),
            "fpca: subject ids do not match row count");
    require(rows.allFinite(), "fpca: rows must be finite");
    if (grid.rows() > 0) {
        require(rows.cols() == 2 * grid.rows(),
                "fpca: row length must be 2 x number of control points");
    }
}

VectorXd momenta_to_vector(const Points& p) {
    VectorXd v(2 * p.rows());
    v.head(p.rows()) = p.col(0);
    v.tail(p.rows()) = p.col(1);
    return v;
}

Points momenta_from_vector(const VectorXd& v) {
    require(v.size() % 2 == 0, "momenta vector length must be even");
    const Eigen::Index n = v.size() / 2;
    Points p(n, 2);
    p.col(0) = v.head(n);
    p.col(1) = v.tail(n);
    return p;
}

PCModel fit_pca(const MomentaMatrix& data, int n_pc) {
    data.validate();
    const Eigen::Index n = data.rows.rows();
    const Eigen::Index dim = data.rows.cols();
    require(n_pc >= 1 && n_pc <= std::min<Eigen::Index>(n - 1, dim),
            "fpca: n_pc must lie in [1, min(subjects - 1, dim)]");

    PCModel model;
    model.grid = data.grid;
    model.subject_ids = data.subject_ids;
    model.mean = data.rows.colwise().mean();
    const MatrixXd centered = data.rows.rowwise() - model.mean.transpose();

    const double total_var = centered.squaredNorm() / static_cast<double>(n);
    require(total_var > 0.0, "fpca: data has zero variance");

    Eigen::BDCSVD<MatrixXd> svd(centered,
                                Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd& sv = svd.singularValues();

    model.components.resize(n_pc, dim);
    model.score_sd.resize(n_pc);
    model.eigenvalues.resize(n_pc);
    model.scores.resize(n, n_pc);
    model.var_explained.resize(n_pc);
    model.cum_var_explained.resize(n_pc);

    double cum = 0.0;
    for (int l = 0; l < n_pc; ++l) {
        VectorXd u = svd.matrixV().col(l);
        VectorXd raw = centered * u;  // raw projections, == U_l * sv_l

        // sign convention: largest-magnitude component entry positive
        Eigen::Index imax = 0;
        u.cwiseAbs().maxCoeff(&imax);
        if (u(imax) < 0.0) {
            u = -u;
            raw = -raw;
        }

        const double sd = sv(l) / std::sqrt(static_cast<double>(n));
        require(sd > 0.0, "fpca: component " + std::to_string(l + 1) +
                              " has zero variance; reduce n_pc");
        model.score_sd(l) = sd;
        model.eigenvalues(l) = sd * sd;
        model.components.row(l) = (sd * u).transpose();
        model.scores.col(l) = raw / sd;
        model.var_explained(l) = sd * sd / total_var;
        cum += model.var_explained(l);
        model.cum_var_explained(l) = cum;
    }
    return model;
}

VectorXd project(const VectorXd& row, const PCModel& model) {
    require(row.size() == model.mean.size(),
            "project: vector length does not match the model grid");
    const VectorXd centered = row - model.mean;
    VectorXd scores(model.n_pc());
    for (int l = 0; l < model.n_pc(); ++l) {
        // components store sd_l * u_l
        scores(l) = model.components.row(l).dot(centered) /
                    (model.score_sd(l) * model.score_sd(l));
    }
    return scores;
}

VectorXd project_momenta(const MomentaField& m, const PCModel& model) {
    m.validate();
    require(model.grid.rows() == m.q0.rows() &&
                model.grid.isApprox(m.q0, 1e-9),
            "project_momenta: control grid does not match the model");
    return project(momenta_to_vector(m.p0), model);
}

std::vector<Curve> pc_flow_curves(const PCModel& model, int component,
                                  const Curve& template_curve,
                                  const std::vector<double>& multipliers,
                                  int n_steps, double sigma_v) {
    require(component >= 0 && component < model.n_pc(),
            "pc_flow_curves: component out of range");
    require(template_curve.size() * 2 == model.mean.size(),
            "pc_flow_curves: template grid does not match the model grid");

    std::vector<Curve> out;
    out.reserve(multipliers.size());
    for (double c : multipliers) {
        const VectorXd v =
            model.mean + c * model.components.row(component).transpose();
        MomentaField m{template_curve.pts, momenta_from_vector(v)};
        const GeodesicPath path = integrate_geodesic(m, n_steps, sigma_v);
        out.push_back(Curve{path.steps.back().q});
    }
    return out;
}

namespace {
nlohmann::json vec_to_json(const VectorXd& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

VectorXd vec_from_json(const nlohmann::json& arr) {
    VectorXd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
    }
    return v;
}
}  // namespace

nlohmann::json pc_model_to_json(const PCModel& model) {
    nlohmann::json components = nlohmann::json::array();
    for (int l = 0; l < model.n_pc(); ++l) {
        components.push_back(vec_to_json(model.components.row(l).transpose()));
    }
    nlohmann::json grid = nlohmann::json::array();
    for (Eigen::Index i = 0; i < model.grid.rows(); ++i) {
        grid.push_back({model.grid(i, 0), model.grid(i, 1)});
    }
    nlohmann::json scores = nlohmann::json::array();
    for (Eigen::Index i = 0; i < model.scores.rows(); ++i) {
        scores.push_back(vec_to_json(model.scores.row(i).transpose()));
    }
    return {{"mean", vec_to_json(model.mean)},
            {"components", components},
            {"score_sd", vec_to_json(model.score_sd)},
            {"eigenvalues", vec_to_json(model.eigenvalues)},
            {"var_explained", vec_to_json(model.var_explained)},
            {"cum_var_explained", vec_to_json(model.cum_var_explained)},
            {"grid", grid},
            {"scores", scores},
            {"subject_ids", model.subject_ids}};
}

PCModel pc_model_from_json(const nlohmann::json& j) {
    PCModel model;
    model.mean = vec_from_json(j.at("mean"));
    const auto& comps = j.at("components");
    model.components.resize(comps.size(), model.mean.size());
    for (std::size_t l = 0; l < comps.size(); ++l) {
        model.components.row(static_cast<Eigen::Index>(l)) =
            vec_from_json(comps[l]).transpose();
    }
    model.score_sd = vec_from_json(j.at("score_sd"));
    model.eigenvalues = vec_from_json(j.at("eigenvalues"));
    model.var_explained = vec_from_json(j.at("var_explained"));
    model.cum_var_explained = vec_from_json(j.at("cum_var_explained"));
    const auto& grid = j.at("grid");
    model.grid.resize(grid.size(), 2);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        model.grid(static_cast<Eigen::Index>(i), 0) = grid[i][0].get<double>();
        model.grid(static_cast<Eigen::Index>(i), 1) = grid[i][1].get<double>();
    }
    const auto& scores = j.at("scores");
    model.scores.resize(scores.size(), model.components.rows());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        model.scores.row(static_cast<Eigen::Index>(i)) =
            vec_from_json(scores[i]).transpose();
    }
    model.subject_ids = j.at("subject_ids").get<std::vector<std::string>>();
    return model;
}

}  // namespace actigeo
