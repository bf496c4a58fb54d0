#pragma once

#include "curve.hpp"
#include "fpca.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace actigeo::synth {

// Gaussian bump in clock-time coordinates: amp * exp(-(t-c)^2 / (2 w^2)).
struct GaussBump {
    double center_min = 0.0;
    double width_min = 1.0;
    double amp = 1.0;
};

struct ModeRecipe {
    std::vector<GaussBump> x;  // temporal-shift component
    std::vector<GaussBump> y;  // magnitude component
};

struct BaselineRecipe {
    double base = 0.0;
    std::vector<GaussBump> bumps;
};

// Deterministic generator inputs: a smooth two-peak day profile standing in
// for a cohort-mean baseline, plus three raw deformation-mode shapes
// (all-day magnitude increase, local mid-morning boost, rightward phase
// shift of active hours).
struct SynthRecipes {
    BaselineRecipe baseline;
    std::array<ModeRecipe, 3> modes;
};

SynthRecipes default_recipes();
SynthRecipes recipes_from_json(const nlohmann::json& j);
nlohmann::json recipes_to_json(const SynthRecipes& r);

struct SynthConfig {
    int n_subjects = 100;
    int incomplete_subjects = 0;  // emitted without follow-up rows
    std::uint64_t rng_seed = 12345;
    // score SD per mode = scale_base * amplitude
    std::array<double, 3> scale_base{0.8 / 2000, 1.2 / 2000, 1.5 / 2000};
    double amplitude = 20.0;
    int window_start_min = 420;  // 7am
    int window_end_min = 1261;   // through 9pm inclusive on the 5-min grid
    int epoch_minutes = 5;
    int n_steps = 11;
    double sigma_v = 0.2;
    SynthRecipes recipes = default_recipes();

    std::array<double, 3> scale() const {
        return {scale_base[0] * amplitude, scale_base[1] * amplitude,
                scale_base[2] * amplitude};
    }
    void validate() const;
};

struct SynthCohort {
    std::vector<std::string> subject_ids;
    Curve baseline;               // shared normalized baseline
    std::vector<Curve> followups; // one per subject, deformed grids
    MatrixXd true_scores;         // n x 3
    MatrixXd true_modes;          // 3 x 2 n_g, orthonormal
    std::vector<double> grid_minutes;
    ScaleParams scale_params;
    int n_complete = 0;  // first n_complete subjects carry both visits
};

// Gram-Schmidt under the Frobenius inner product; errors when the raw fields
// are not linearly independent.
MatrixXd make_orthonormal_modes(const MatrixXd& raw);

SynthCohort simulate_cohort(const SynthConfig& cfg);

// Raw activity rows in the ingest CSV contract (one day per visit).
void write_cohort_csv(const SynthCohort& cohort, std::ostream& out);
void write_cohort_csv(const SynthCohort& cohort, const std::string& path);

nlohmann::json truth_to_json(const SynthCohort& cohort);

// Comparison baseline: PCA of pointwise follow-up-minus-baseline magnitude
// differences on the common grid (follow-up resampled by linear
// interpolation). Baselines may be per-subject or shared.
PCModel vertical_diff_pca(const std::vector<Curve>& baselines,
                          const std::vector<Curve>& followups, int n_pc);

struct ModeRecovery {
    int matched_pc = -1;       // 0-based index into the estimated model
    double score_corr = 0.0;   // after sign alignment (>= 0)
    double momenta_corr = 0.0; // NaN when shapes are not comparable
};

struct RecoveryReport {
    std::array<ModeRecovery, 3> modes;
    double top3_cum_var = 0.0;
};

RecoveryReport compare_recovery(const MatrixXd& true_scores,
                                const MatrixXd& true_modes,
                                const PCModel& estimated);

nlohmann::json recovery_to_json(const RecoveryReport& r);

// Mean over subjects of the RMS follow-up reconstruction error on the
// baseline grid when each method is truncated to its top n_pc_use
// components. The momenta model reconstructs by geodesic flow of the
// baseline; the vertical model adds its reconstructed difference field.
double flow_reconstruction_error(const PCModel& momenta_model,
                                 const Curve& baseline,
                                 const std::vector<Curve>& followups,
                                 int n_pc_use, int n_steps, double sigma_v);
double vertical_reconstruction_error(const PCModel& diff_model,
                                     const Curve& baseline,
                                     const std::vector<Curve>& followups,
                                     int n_pc_use);

}  // namespace actigeo::synth
