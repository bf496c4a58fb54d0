#include "synth.hpp"

#include "csv.hpp"
#include "rng.hpp"
#include "shooting.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace actigeo::synth {

namespace {

double eval_bumps(const std::vector<GaussBump>& bumps, double t) {
    double v = 0.0;
    for (const GaussBump& b : bumps) {
        const double u = (t - b.center_min) / b.width_min;
        v += b.amp * std::exp(-0.5 * u * u);
    }
    return v;
}

std::vector<GaussBump> bumps_from_json(const nlohmann::json& arr) {
    std::vector<GaussBump> out;
    for (const auto& b : arr) {
        out.push_back(GaussBump{b.at("center_min").get<double>(),
                                b.at("width_min").get<double>(),
                                b.at("amp").get<double>()});
    }
    return out;
}

nlohmann::json bumps_to_json(const std::vector<GaussBump>& bumps) {
    nlohmann::json arr = nlohmann::json::array();
    for (const GaussBump& b : bumps) {
        arr.push_back({{"center_min", b.center_min},
                       {"width_min", b.width_min},
                       {"amp", b.amp}});
    }
    return arr;
}

double pearson(const VectorXd& a, const VectorXd& b) {
    const VectorXd ac = a.array() - a.mean();
    const VectorXd bc = b.array() - b.mean();
    const double den = ac.norm() * bc.norm();
    if (den <= 0.0) return 0.0;
    return ac.dot(bc) / den;
}

std::string subject_label(int i) {
    std::ostringstream os;
    os << "S" << (i < 99 ? (i < 9 ? "00" : "0") : "") << (i + 1);
    return os.str();
}

}  // namespace

SynthRecipes default_recipes() {
    SynthRecipes r;
    // two-peak day profile: higher mid-morning peak, softer late-afternoon one
    r.baseline.base = 120.0;
    r.baseline.bumps = {GaussBump{600.0, 110.0, 950.0},
                        GaussBump{1020.0, 130.0, 520.0}};
    // mode 1: general increase of activity throughout the day
    r.modes[0].y = {GaussBump{840.0, 330.0, 1.0}};
    // mode 2: local mid-morning boost
    r.modes[1].y = {GaussBump{590.0, 60.0, 1.0}};
    // mode 3: rightward shift of active hours
    r.modes[2].x = {GaussBump{800.0, 280.0, 1.0}};
    return r;
}

SynthRecipes recipes_from_json(const nlohmann::json& j) {
    SynthRecipes r;
    r.baseline.base = j.at("baseline").at("base").get<double>();
    r.baseline.bumps = bumps_from_json(j.at("baseline").at("bumps"));
    const auto& modes = j.at("modes");
    require(modes.size() == 3, "synth recipes: exactly 3 modes required");
    for (int l = 0; l < 3; ++l) {
        r.modes[l].x = bumps_from_json(modes[l].at("x"));
        r.modes[l].y = bumps_from_json(modes[l].at("y"));
    }
    return r;
}

nlohmann::json recipes_to_json(const SynthRecipes& r) {
    nlohmann::json modes = nlohmann::json::array();
    for (int l = 0; l < 3; ++l) {
        modes.push_back({{"x", bumps_to_json(r.modes[l].x)},
                         {"y", bumps_to_json(r.modes[l].y)}});
    }
    return {{"baseline",
             {{"base", r.baseline.base},
              {"bumps", bumps_to_json(r.baseline.bumps)}}},
            {"modes", modes}};
}

void SynthConfig::validate() const {
    require(n_subjects >= 1, "synth: n_subjects must be >= 1");
    require(incomplete_subjects >= 0 && incomplete_subjects < n_subjects,
            "synth: incomplete_subjects must lie in [0, n_subjects)");
    require(amplitude > 0.0, "synth: amplitude must be > 0");
    for (double s : scale_base) {
        require(s >= 0.0, "synth: scale factors must be >= 0");
    }
    require(window_start_min >= 0 && window_start_min < window_end_min &&
                window_end_min <= 1440,
            "synth: window must satisfy 0 <= start < end <= 1440");
    require(epoch_minutes >= 1, "synth: epoch_minutes must be >= 1");
    require(n_steps >= 1 && sigma_v > 0.0, "synth: bad flow parameters");
}

MatrixXd make_orthonormal_modes(const MatrixXd& raw) {
    require(raw.rows() == 3, "make_orthonormal_modes: expected 3 raw fields");
    MatrixXd out = raw;
    for (int l = 0; l < 3; ++l) {
        for (int k = 0; k < l; ++k) {
            out.row(l) -= out.row(l).dot(out.row(k)) * out.row(k);
        }
        const double norm = out.row(l).norm();
        require(norm > 1e-10 * std::max(1.0, raw.row(l).norm()),
                "make_orthonormal_modes: raw fields are not linearly "
                "independent (rank < 3)");
        out.row(l) /= norm;
    }
    return out;
}

SynthCohort simulate_cohort(const SynthConfig& cfg) {
    cfg.validate();

    std::vector<double> grid;
    for (int t = cfg.window_start_min; t < cfg.window_end_min;
         t += cfg.epoch_minutes) {
        grid.push_back(static_cast<double>(t));
    }
    const Eigen::Index n_g = static_cast<Eigen::Index>(grid.size());
    require(n_g >= 4, "synth: window holds fewer than 4 epochs");

    // baseline profile and cohort scaling (headroom above the baseline peak
    // so magnitude increases stay inside the frame)
    VectorXd vm(n_g);
    for (Eigen::Index i = 0; i < n_g; ++i) {
        vm(i) = cfg.recipes.baseline.base +
                eval_bumps(cfg.recipes.baseline.bumps, grid[i]);
    }
    SynthCohort cohort;
    cohort.grid_minutes = grid;
    cohort.scale_params.t_min = grid.front();
    cohort.scale_params.t_max = grid.back();
    cohort.scale_params.m_max = 1.25 * vm.maxCoeff();

    Points base_pts(n_g, 2);
    for (Eigen::Index i = 0; i < n_g; ++i) {
        base_pts(i, 0) = time_to_x(grid[i], cohort.scale_params);
        base_pts(i, 1) = mag_to_y(vm(i), cohort.scale_params);
    }
    cohort.baseline = make_curve(base_pts);

    // raw mode fields on the grid, then orthonormalized
    MatrixXd raw(3, 2 * n_g);
    for (int l = 0; l < 3; ++l) {
        for (Eigen::Index i = 0; i < n_g; ++i) {
            raw(l, i) = eval_bumps(cfg.recipes.modes[l].x, grid[i]);
            raw(l, n_g + i) = eval_bumps(cfg.recipes.modes[l].y, grid[i]);
        }
    }
    cohort.true_modes = make_orthonormal_modes(raw);

    const std::array<double, 3> scale = cfg.scale();
    cohort.true_scores.resize(cfg.n_subjects, 3);
    cohort.followups.reserve(cfg.n_subjects);
    cohort.subject_ids.reserve(cfg.n_subjects);
    cohort.n_complete = cfg.n_subjects - cfg.incomplete_subjects;

    for (int i = 0; i < cfg.n_subjects; ++i) {
        cohort.subject_ids.push_back(subject_label(i));
        Rng rng(mix_seed(cfg.rng_seed, static_cast<std::uint64_t>(i)));
        VectorXd p_vec = VectorXd::Zero(2 * n_g);
        for (int l = 0; l < 3; ++l) {
            const double c = rng.normal() * scale[l];
            cohort.true_scores(i, l) = c;
            p_vec += c * cohort.true_modes.row(l).transpose();
        }
        MomentaField m{base_pts, momenta_from_vector(p_vec)};
        GeodesicPath path;
        try {
            path = integrate_geodesic(m, cfg.n_steps, cfg.sigma_v);
        } catch (const Error& e) {
            fail_runtime("synth: flow failed for subject " +
                         cohort.subject_ids.back() + ": " + e.what());
        }
        Points fu = path.steps.back().q;
        if (!x_strictly_increasing(fu)) {
            fail_runtime("synth: follow-up curve for subject " +
                         cohort.subject_ids.back() +
                         " is not x-monotone; lower the amplitude");
        }
        cohort.followups.push_back(Curve{std::move(fu)});
    }
    return cohort;
}

void write_cohort_csv(const SynthCohort& cohort, std::ostream& out) {
    csv::write_row(out, {"subject_id", "visit", "day_index", "minute_of_day",
                         "vm"});
    const Eigen::Index n_g =
        static_cast<Eigen::Index>(cohort.grid_minutes.size());
    VectorXd grid_x(n_g);
    for (Eigen::Index i = 0; i < n_g; ++i) {
        grid_x(i) = time_to_x(cohort.grid_minutes[static_cast<std::size_t>(i)],
                              cohort.scale_params);
    }
    for (std::size_t s = 0; s < cohort.subject_ids.size(); ++s) {
        const std::string& id = cohort.subject_ids[s];
        const bool complete = static_cast<int>(s) < cohort.n_complete;
        for (int visit = 0; visit < (complete ? 2 : 1); ++visit) {
            VectorXd y;
            if (visit == 0) {
                y = cohort.baseline.pts.col(1);
            } else {
                y = resample_y(cohort.followups[s].pts, grid_x);
            }
            for (Eigen::Index i = 0; i < n_g; ++i) {
                const double vm = std::max(
                    0.0, y_to_mag(y(i), cohort.scale_params));
                csv::write_row(
                    out,
                    {id, std::to_string(visit), "0",
                     std::to_string(static_cast<int>(
                         cohort.grid_minutes[static_cast<std::size_t>(i)])),
                     csv::format_full(vm)});
            }
        }
    }
}

void write_cohort_csv(const SynthCohort& cohort, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail_runtime("synth: cannot write " + path);
    write_cohort_csv(cohort, out);
}

nlohmann::json truth_to_json(const SynthCohort& cohort) {
    nlohmann::json scores = nlohmann::json::array();
    for (Eigen::Index i = 0; i < cohort.true_scores.rows(); ++i) {
        scores.push_back({cohort.true_scores(i, 0), cohort.true_scores(i, 1),
                          cohort.true_scores(i, 2)});
    }
    nlohmann::json modes = nlohmann::json::array();
    for (int l = 0; l < 3; ++l) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < cohort.true_modes.cols(); ++c) {
            row.push_back(cohort.true_modes(l, c));
        }
        modes.push_back(row);
    }
    return {{"subject_ids", cohort.subject_ids},
            {"n_complete", cohort.n_complete},
            {"true_scores", scores},
            {"true_modes", modes},
            {"grid_minutes", cohort.grid_minutes},
            {"scale_params",
             {{"t_min", cohort.scale_params.t_min},
              {"t_max", cohort.scale_params.t_max},
              {"m_max", cohort.scale_params.m_max}}}};
}

PCModel vertical_diff_pca(const std::vector<Curve>& baselines,
                          const std::vector<Curve>& followups, int n_pc) {
    require(!baselines.empty() && baselines.size() == followups.size(),
            "vertical_diff_pca: baseline/follow-up counts differ");
    const VectorXd grid_x = baselines.front().pts.col(0);
    const Eigen::Index m = grid_x.size();
    const Eigen::Index n = static_cast<Eigen::Index>(baselines.size());

    MomentaMatrix data;
    data.rows.resize(n, m);
    for (std::size_t i = 0; i < baselines.size(); ++i) {
        require(baselines[i].size() == m,
                "vertical_diff_pca: curves must share the time window");
        const VectorXd fu = resample_y(followups[i].pts, grid_x);
        data.rows.row(static_cast<Eigen::Index>(i)) =
            (fu - baselines[i].pts.col(1)).transpose();
        data.subject_ids.push_back("S" + std::to_string(i + 1));
    }
    data.grid.resize(0, 2);

    // a cohort with no change has nothing to decompose: report zero
    // eigenvalues instead of failing
    const MatrixXd centered = data.rows.rowwise() - data.rows.colwise().mean();
    if (centered.squaredNorm() / static_cast<double>(n) < 1e-24) {
        PCModel model;
        model.mean = data.rows.colwise().mean();
        model.components = MatrixXd::Zero(n_pc, m);
        model.score_sd = VectorXd::Zero(n_pc);
        model.eigenvalues = VectorXd::Zero(n_pc);
        model.scores = MatrixXd::Zero(n, n_pc);
        model.var_explained = VectorXd::Zero(n_pc);
        model.cum_var_explained = VectorXd::Zero(n_pc);
        model.grid.resize(0, 2);
        model.subject_ids = data.subject_ids;
        return model;
    }
    return fit_pca(data, n_pc);
}

RecoveryReport compare_recovery(const MatrixXd& true_scores,
                                const MatrixXd& true_modes,
                                const PCModel& estimated) {
    require(true_scores.rows() == estimated.scores.rows(),
            "compare_recovery: subject counts differ");
    RecoveryReport rep;
    rep.top3_cum_var = estimated.cum_var_explained(
        std::min<Eigen::Index>(2, estimated.cum_var_explained.size() - 1));

    for (int l = 0; l < 3; ++l) {
        ModeRecovery best;
        for (int j = 0; j < estimated.n_pc(); ++j) {
            const double r =
                pearson(true_scores.col(l), estimated.scores.col(j));
            if (std::abs(r) > best.score_corr) {
                best.score_corr = std::abs(r);
                best.matched_pc = j;
                const double sign = r >= 0.0 ? 1.0 : -1.0;
                if (true_modes.cols() == estimated.components.cols()) {
                    best.momenta_corr =
                        sign * pearson(true_modes.row(l).transpose(),
                                       estimated.components.row(j).transpose());
                } else if (2 * estimated.components.cols() ==
                           true_modes.cols()) {
                    // vertical-difference baseline: compare against the
                    // magnitude block of the true mode
                    const Eigen::Index m = estimated.components.cols();
                    best.momenta_corr =
                        sign * pearson(true_modes.row(l).tail(m).transpose(),
                                       estimated.components.row(j).transpose());
                } else {
                    best.momenta_corr = std::nan("");
                }
            }
        }
        rep.modes[static_cast<std::size_t>(l)] = best;
    }
    return rep;
}

nlohmann::json recovery_to_json(const RecoveryReport& r) {
    nlohmann::json modes = nlohmann::json::array();
    for (int l = 0; l < 3; ++l) {
        const ModeRecovery& m = r.modes[static_cast<std::size_t>(l)];
        modes.push_back({{"true_mode", l + 1},
                         {"matched_pc", m.matched_pc + 1},
                         {"score_corr", m.score_corr},
                         {"momenta_corr", m.momenta_corr}});
    }
    return {{"modes", modes}, {"top3_cum_var", r.top3_cum_var}};
}

double flow_reconstruction_error(const PCModel& momenta_model,
                                 const Curve& baseline,
                                 const std::vector<Curve>& followups,
                                 int n_pc_use, int n_steps, double sigma_v) {
    require(n_pc_use >= 1 && n_pc_use <= momenta_model.n_pc(),
            "flow_reconstruction_error: n_pc_use out of range");
    const VectorXd grid_x = baseline.pts.col(0);
    double total = 0.0;
    for (std::size_t i = 0; i < followups.size(); ++i) {
        VectorXd v = momenta_model.mean;
        for (int l = 0; l < n_pc_use; ++l) {
            v += momenta_model.scores(static_cast<Eigen::Index>(i), l) *
                 momenta_model.components.row(l).transpose();
        }
        MomentaField m{baseline.pts, momenta_from_vector(v)};
        const GeodesicPath path = integrate_geodesic(m, n_steps, sigma_v);
        const VectorXd rec = resample_y(path.steps.back().q, grid_x);
        const VectorXd act = resample_y(followups[i].pts, grid_x);
        total += std::sqrt((rec - act).squaredNorm() /
                           static_cast<double>(grid_x.size()));
    }
    return total / static_cast<double>(followups.size());
}

double vertical_reconstruction_error(const PCModel& diff_model,
                                     const Curve& baseline,
                                     const std::vector<Curve>& followups,
                                     int n_pc_use) {
    require(n_pc_use >= 1 && n_pc_use <= diff_model.n_pc(),
            "vertical_reconstruction_error: n_pc_use out of range");
    const VectorXd grid_x = baseline.pts.col(0);
    double total = 0.0;
    for (std::size_t i = 0; i < followups.size(); ++i) {
        VectorXd d = diff_model.mean;
        for (int l = 0; l < n_pc_use; ++l) {
            d += diff_model.scores(static_cast<Eigen::Index>(i), l) *
                 diff_model.components.row(l).transpose();
        }
        const VectorXd rec = baseline.pts.col(1) + d;
        const VectorXd act = resample_y(followups[i].pts, grid_x);
        total += std::sqrt((rec - act).squaredNorm() /
                           static_cast<double>(grid_x.size()));
    }
    return total / static_cast<double>(followups.size());
}

}  // namespace actigeo::synth
