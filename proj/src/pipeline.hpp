#pragma once

#include "ingest.hpp"
#include "matching.hpp"
#include "synth.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace actigeo::pipeline {

inline constexpr const char* kToolVersion = "0.1.0";

// Resolved run configuration, loaded from an INI-style config file
// (sections of key = value pairs). Unknown sections or keys are rejected.
struct PipelineConfig {
    // [io]
    std::string input_csv;
    std::string covariates_csv;
    std::string out_dir = "out";

    // [preprocess]
    ingest::PreprocessConfig preprocess;
    std::string scale_params_json;  // reuse cohort scaling when set

    // [match]
    MatchConfig match;

    // [fpca]
    int n_pc = 10;
    std::string fpca_method = "momenta";  // or "vertical_diff"
    std::string truth_json;               // recovery report when set

    // [regress]
    std::string response;  // covariate column or "pc_score:<l>"
    std::vector<std::string> forced_in;
    int folds = 10;
    bool one_se_rule = false;
    bool functional = false;
    int n_basis = 30;

    // [simulate]
    synth::SynthConfig sim;
    std::string recipes_json;
    bool simulate_section = false;

    // [render]
    std::string render_kind = "match";  // or "pc"
    std::string render_subject;         // default: first matched subject
    std::string render_match_json;
    std::string render_pc_model;
    std::string render_curves_csv;
    std::string render_scale_json;
    int pc_index = 1;  // 1-based
    int arrow_stride = 10;
    double arrow_scale = 1.0;
    std::vector<double> multipliers{1.0, -1.0};
    int fig_width = 960;
    int fig_height = 540;

    // [run]
    int jobs = 1;
    std::uint64_t seed = 12345;

    nlohmann::json echo() const;
};

PipelineConfig load_config(const std::string& path);
PipelineConfig parse_config(std::istream& in, const std::string& origin);

// Dotted "section.key" overrides (used for --seed / --jobs / --out).
void apply_override(PipelineConfig& cfg, const std::string& key,
                    const std::string& value);

// Runs one stage ("preprocess", "match", "fpca", "regress", "simulate",
// "render" or "all") and returns its summary.
nlohmann::json run_stage(PipelineConfig& cfg, const std::string& stage);

std::uint64_t fnv1a64(const std::string& bytes);
std::string hash_file(const std::string& path);

}  // namespace actigeo::pipeline
