#include "pipeline.hpp"

#include "csv.hpp"
#include "fpca.hpp"
#include "rng.hpp"
#include "stats.hpp"
#include "svg.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace actigeo::pipeline {

namespace {

// ----------------------------------------------------------------- ini ---

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

using IniData = std::map<std::string, std::map<std::string, std::string>>;

IniData parse_ini(std::istream& in, const std::string& origin) {
    IniData data;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') {
                fail_validation(origin + ": line " + std::to_string(lineno) +
                                ": malformed section header");
            }
            section = trim(t.substr(1, t.size() - 2));
            data[section];
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            fail_validation(origin + ": line " + std::to_string(lineno) +
                            ": expected key = value");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            fail_validation(origin + ": line " + std::to_string(lineno) +
                            ": empty key");
        }
        if (!data[section].emplace(key, value).second) {
            fail_validation(origin + ": duplicate key " + section + "." + key);
        }
    }
    return data;
}

int to_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const int x = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        fail_validation("config: " + key + " must be an integer, got '" + v +
                        "'");
    }
}

double to_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        fail_validation("config: " + key + " must be a number, got '" + v +
                        "'");
    }
}

bool to_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail_validation("config: " + key + " must be a boolean, got '" + v + "'");
}

std::uint64_t to_u64(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const std::uint64_t x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        fail_validation("config: " + key +
                        " must be a nonnegative integer, got '" + v + "'");
    }
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(v);
    while (std::getline(is, item, ',')) {
        const std::string t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

void set_key(PipelineConfig& cfg, const std::string& section,
             const std::string& key, const std::string& value) {
    const std::string full = section + "." + key;
    if (section == "io") {
        if (key == "input_csv") cfg.input_csv = value;
        else if (key == "covariates_csv") cfg.covariates_csv = value;
        else if (key == "out_dir") cfg.out_dir = value;
        else fail_validation("config: unknown key " + full);
    } else if (section == "preprocess") {
        if (key == "window_start_min") cfg.preprocess.window_start_min = to_int(value, full);
        else if (key == "window_end_min") cfg.preprocess.window_end_min = to_int(value, full);
        else if (key == "epoch_minutes") cfg.preprocess.epoch_minutes = to_int(value, full);
        else if (key == "target_df") cfg.preprocess.target_df = to_double(value, full);
        else if (key == "scale_params_json") cfg.scale_params_json = value;
        else fail_validation("config: unknown key " + full);
    } else if (section == "match") {
        if (key == "sigma_v") cfg.match.sigma_v = to_double(value, full);
        else if (key == "sigma_w") cfg.match.sigma_w = to_double(value, full);
        else if (key == "gamma_v") cfg.match.gamma_v = to_double(value, full);
        else if (key == "gamma_w") cfg.match.gamma_w = to_double(value, full);
        else if (key == "n_steps") cfg.match.n_steps = to_int(value, full);
        else if (key == "control_stride") cfg.match.control_stride = to_int(value, full);
        else if (key == "max_iters") cfg.match.max_iters = to_int(value, full);
        else if (key == "grad_tol") cfg.match.grad_tol = to_double(value, full);
        else fail_validation("config: unknown key " + full);
    } else if (section == "fpca") {
        if (key == "n_pc") cfg.n_pc = to_int(value, full);
        else if (key == "method") {
            if (value != "momenta" && value != "vertical_diff") {
                fail_validation("config: fpca.method must be momenta or "
                                "vertical_diff");
            }
            cfg.fpca_method = value;
        } else if (key == "truth_json") cfg.truth_json = value;
        else fail_validation("config: unknown key " + full);
    } else if (section == "regress") {
        if (key == "response") cfg.response = value;
        else if (key == "forced_in") cfg.forced_in = split_list(value);
        else if (key == "folds") cfg.folds = to_int(value, full);
        else if (key == "one_se_rule") cfg.one_se_rule = to_bool(value, full);
        else if (key == "functional") cfg.functional = to_bool(value, full);
        else if (key == "n_basis") cfg.n_basis = to_int(value, full);
        else fail_validation("config: unknown key " + full);
    } else if (section == "simulate") {
        cfg.simulate_section = true;
        if (key == "n_subjects") cfg.sim.n_subjects = to_int(value, full);
        else if (key == "incomplete_subjects") cfg.sim.incomplete_subjects = to_int(value, full);
        else if (key == "rng_seed") cfg.sim.rng_seed = to_u64(value, full);
        else if (key == "amplitude") cfg.sim.amplitude = to_double(value, full);
        else if (key == "scale_base") {
            const auto parts = split_list(value);
            require(parts.size() == 3, "config: simulate.scale_base needs 3 values");
            for (int l = 0; l < 3; ++l) {
                cfg.sim.scale_base[l] = to_double(parts[l], full);
            }
        } else if (key == "recipes_json") cfg.recipes_json = value;
        else if (key == "window_start_min") cfg.sim.window_start_min = to_int(value, full);
        else if (key == "window_end_min") cfg.sim.window_end_min = to_int(value, full);
        else if (key == "epoch_minutes") cfg.sim.epoch_minutes = to_int(value, full);
        else if (key == "sigma_v") cfg.sim.sigma_v = to_double(value, full);
        else if (key == "n_steps") cfg.sim.n_steps = to_int(value, full);
        else fail_validation("config: unknown key " + full);
    } else if (section == "render") {
        if (key == "kind") {
            if (value != "match" && value != "pc") {
                fail_validation("config: render.kind must be match or pc");
            }
            cfg.render_kind = value;
        } else if (key == "subject") cfg.render_subject = value;
        else if (key == "match_json") cfg.render_match_json = value;
        else if (key == "pc_model_json") cfg.render_pc_model = value;
        else if (key == "curves_csv") cfg.render_curves_csv = value;
        else if (key == "scale_json") cfg.render_scale_json = value;
        else if (key == "pc_index") cfg.pc_index = to_int(value, full);
        else if (key == "arrow_stride") cfg.arrow_stride = to_int(value, full);
        else if (key == "arrow_scale") cfg.arrow_scale = to_double(value, full);
        else if (key == "multipliers") {
            cfg.multipliers.clear();
            for (const std::string& s : split_list(value)) {
                cfg.multipliers.push_back(to_double(s, full));
            }
            require(!cfg.multipliers.empty(),
                    "config: render.multipliers must not be empty");
        } else if (key == "width") cfg.fig_width = to_int(value, full);
        else if (key == "height") cfg.fig_height = to_int(value, full);
        else fail_validation("config: unknown key " + full);
    } else if (section == "run") {
        if (key == "jobs") cfg.jobs = to_int(value, full);
        else if (key == "seed") cfg.seed = to_u64(value, full);
        else fail_validation("config: unknown key " + full);
    } else {
        fail_validation("config: unknown section [" + section + "]");
    }
}

// ------------------------------------------------------------- helpers ---

std::string sanitize_id(const std::string& id) {
    std::string out;
    for (char c : id) {
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
                              c == '_'
                          ? c
                          : '_');
    }
    return out.empty() ? "_" : out;
}

void write_file(const std::string& path, const std::string& content) {
    fs::create_directories(fs::path(path).parent_path().empty()
                               ? fs::path(".")
                               : fs::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail_runtime("cannot write " + path);
    out << content;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    write_file(tmp, content);
    fs::rename(tmp, path);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_validation("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const std::string& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        fail_validation(path + ": invalid json: " + e.what());
    }
}

// Runs tasks 0..n-1 on a bounded pool; returns one error string per task
// (empty = success). Results must be written into per-index slots by the
// task itself so scheduling order cannot leak into outputs.
std::vector<std::string> run_parallel(std::size_t n, int jobs,
                                      const std::function<void(std::size_t)>& task) {
    std::vector<std::string> errors(n);
    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
    std::atomic<std::size_t> next{0};
    auto drain = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                task(i);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            } catch (...) {
                errors[i] = "unknown error";
            }
        }
    };
    if (workers == 1) {
        drain();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(drain);
        for (std::thread& t : pool) t.join();
    }
    return errors;
}

struct StageTimer {
    std::chrono::steady_clock::time_point start =
        std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             start)
            .count();
    }
};

void write_manifest(const PipelineConfig& cfg, const std::string& stage,
                    const std::vector<std::string>& outputs,
                    double wall_time_s, const nlohmann::json& extra) {
    nlohmann::json hashes = nlohmann::json::object();
    for (const std::string& rel : outputs) {
        hashes[rel] = hash_file((fs::path(cfg.out_dir) / rel).string());
    }
    nlohmann::json manifest{{"stage", stage},
                            {"tool_version", kToolVersion},
                            {"config", cfg.echo()},
                            {"wall_time_s", wall_time_s},
                            {"outputs", hashes}};
    if (!extra.is_null()) manifest["timings"] = extra;
    write_file_atomic(
        (fs::path(cfg.out_dir) / ("manifest_" + stage + ".json")).string(),
        manifest.dump(2) + "\n");
}

// --------------------------------------------------- shared file formats ---

nlohmann::json scale_to_json(const ScaleParams& sp) {
    return {{"t_min", sp.t_min}, {"t_max", sp.t_max}, {"m_max", sp.m_max}};
}

ScaleParams scale_from_json(const nlohmann::json& j) {
    ScaleParams sp;
    sp.t_min = j.at("t_min").get<double>();
    sp.t_max = j.at("t_max").get<double>();
    sp.m_max = j.at("m_max").get<double>();
    sp.validate();
    return sp;
}

nlohmann::json curve_to_json(const Curve& c) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        arr.push_back({c.x(i), c.y(i)});
    }
    return arr;
}

Curve curve_from_json(const nlohmann::json& arr) {
    Points pts(arr.size(), 2);
    for (std::size_t i = 0; i < arr.size(); ++i) {
        pts(static_cast<Eigen::Index>(i), 0) = arr[i][0].get<double>();
        pts(static_cast<Eigen::Index>(i), 1) = arr[i][1].get<double>();
    }
    return Curve{std::move(pts)};
}

using CurveMap = std::map<std::string, std::array<std::optional<Curve>, 2>>;

CurveMap read_curves_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_validation("curves csv: cannot open " + path);
    csv::Reader reader(in);
    std::vector<std::string> fields;
    require(reader.next(fields) &&
                fields == std::vector<std::string>{"subject_id", "visit", "x",
                                                   "y"},
            "curves csv: header must be subject_id,visit,x,y");
    std::map<std::string, std::array<std::vector<Vector2d>, 2>> raw;
    while (reader.next(fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue;
        require(fields.size() == 4, "curves csv: wrong field count at line " +
                                        std::to_string(reader.record_line()));
        const int visit = fields[1] == "0" ? 0 : 1;
        raw[fields[0]][visit].emplace_back(std::stod(fields[2]),
                                           std::stod(fields[3]));
    }
    CurveMap curves;
    for (auto& [id, visits] : raw) {
        for (int v = 0; v < 2; ++v) {
            if (visits[v].empty()) continue;
            Points pts(visits[v].size(), 2);
            for (std::size_t i = 0; i < visits[v].size(); ++i) {
                pts.row(static_cast<Eigen::Index>(i)) =
                    visits[v][i].transpose();
            }
            curves[id][v] = Curve{std::move(pts)};
        }
    }
    return curves;
}

// ------------------------------------------------------------- stages ----

nlohmann::json run_preprocess(PipelineConfig& cfg) {
    StageTimer timer;
    require(!cfg.input_csv.empty(), "preprocess: io.input_csv is not set");
    if (!fs::exists(cfg.input_csv)) {
        fail_validation("preprocess: input file does not exist: " +
                        cfg.input_csv);
    }
    const ingest::CohortRecords cohort =
        ingest::parse_activity_csv(cfg.input_csv, cfg.preprocess);
    require(!cohort.complete.empty(),
            "preprocess: no subject has both visits");

    struct Smoothed {
        std::string id;
        std::array<ingest::SmoothedSeries, 2> visits;
    };
    std::vector<Smoothed> smoothed(cohort.complete.size());
    const auto errors = run_parallel(
        cohort.complete.size(), cfg.jobs, [&](std::size_t i) {
            const std::string& id = cohort.complete[i];
            smoothed[i].id = id;
            for (int v = 0; v < 2; ++v) {
                const ingest::MinuteSeries avg = ingest::average_days(
                    *cohort.groups.at(id)[v], cfg.preprocess);
                smoothed[i].visits[v] =
                    ingest::smooth_series(avg, cfg.preprocess.target_df);
            }
        });
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i].empty()) {
            fail_runtime("preprocess: subject " + cohort.complete[i] + ": " +
                         errors[i]);
        }
    }

    ScaleParams sp;
    double df_min = 1e300, df_max = -1e300;
    if (!cfg.scale_params_json.empty()) {
        sp = scale_from_json(read_json(cfg.scale_params_json).at("scale_params"));
    } else {
        const auto grid = cfg.preprocess.grid_minutes();
        sp.t_min = grid.front();
        sp.t_max = grid.back();
        double m_max = 0.0;
        for (const Smoothed& s : smoothed) {
            for (const auto& v : s.visits) {
                m_max = std::max(m_max, v.series.values.maxCoeff());
            }
        }
        require(m_max > 0.0, "preprocess: cohort has no positive activity");
        sp.m_max = m_max;
    }
    for (const Smoothed& s : smoothed) {
        for (const auto& v : s.visits) {
            df_min = std::min(df_min, v.achieved_df);
            df_max = std::max(df_max, v.achieved_df);
        }
    }

    fs::create_directories(cfg.out_dir);
    std::ostringstream curves;
    csv::write_row(curves, {"subject_id", "visit", "x", "y"});
    for (const Smoothed& s : smoothed) {
        for (int v = 0; v < 2; ++v) {
            const Curve c = ingest::normalize_curve(s.visits[v].series, sp);
            for (Eigen::Index i = 0; i < c.size(); ++i) {
                csv::write_row(curves, {s.id, std::to_string(v),
                                        csv::format_full(c.x(i)),
                                        csv::format_full(c.y(i))});
            }
        }
    }
    write_file((fs::path(cfg.out_dir) / "curves.csv").string(), curves.str());

    nlohmann::json sidecar{
        {"scale_params", scale_to_json(sp)},
        {"window",
         {{"start_min", cfg.preprocess.window_start_min},
          {"end_min", cfg.preprocess.window_end_min},
          {"epoch_minutes", cfg.preprocess.epoch_minutes}}},
        {"df",
         {{"target", cfg.preprocess.target_df},
          {"achieved_min", df_min},
          {"achieved_max", df_max}}},
        {"subjects",
         {{"complete", cohort.complete}, {"incomplete", cohort.incomplete}}}};
    write_file((fs::path(cfg.out_dir) / "scale_params.json").string(),
               sidecar.dump(2) + "\n");

    nlohmann::json summary{{"stage", "preprocess"},
                           {"subjects_complete", cohort.complete.size()},
                           {"subjects_incomplete", cohort.incomplete.size()},
                           {"df_achieved", {df_min, df_max}},
                           {"m_max", sp.m_max}};
    write_manifest(cfg, "preprocess", {"curves.csv", "scale_params.json"},
                   timer.seconds(), nullptr);
    return summary;
}

nlohmann::json run_match(PipelineConfig& cfg) {
    StageTimer timer;
    const std::string curves_path =
        (fs::path(cfg.out_dir) / "curves.csv").string();
    const CurveMap curves = read_curves_csv(curves_path);

    std::vector<std::string> ids;
    for (const auto& [id, visits] : curves) {
        if (visits[0].has_value() && visits[1].has_value()) ids.push_back(id);
    }
    require(!ids.empty(), "match: no subjects with both visits in " +
                              curves_path);

    std::vector<nlohmann::json> results(ids.size());
    std::vector<double> wall(ids.size(), 0.0);
    const auto errors = run_parallel(ids.size(), cfg.jobs, [&](std::size_t i) {
        const auto& visits = curves.at(ids[i]);
        const MatchResult r =
            match_curves(*visits[0], *visits[1], cfg.match);
        wall[i] = r.wall_time_s;
        nlohmann::json j = match_result_to_json(r, cfg.match, false);
        j["subject_id"] = ids[i];
        results[i] = std::move(j);
    });

    fs::create_directories(fs::path(cfg.out_dir) / "match");
    std::vector<std::string> outputs;
    nlohmann::json per_subject = nlohmann::json::array();
    nlohmann::json timings = nlohmann::json::object();
    std::size_t n_failed = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!errors[i].empty()) {
            ++n_failed;
            per_subject.push_back({{"subject_id", ids[i]},
                                   {"failed", true},
                                   {"error", errors[i]}});
            continue;
        }
        const std::string rel = "match/" + sanitize_id(ids[i]) + ".json";
        write_file((fs::path(cfg.out_dir) / rel).string(),
                   results[i].dump(2) + "\n");
        outputs.push_back(rel);
        per_subject.push_back(
            {{"subject_id", ids[i]},
             {"failed", false},
             {"file", rel},
             {"converged", results[i]["converged"]},
             {"objective", results[i]["objective"]},
             {"final_attachment", results[i]["final_attachment"]},
             {"final_energy", results[i]["final_energy"]},
             {"iterations", results[i]["iterations"]},
             {"diagnostics", results[i]["diagnostics"]}});
        timings[ids[i]] = wall[i];
    }
    if (n_failed == ids.size()) {
        fail_runtime("match: all " + std::to_string(ids.size()) +
                     " subjects failed; first error: " + errors[0]);
    }

    nlohmann::json summary{{"stage", "match"},
                           {"subjects", ids.size()},
                           {"failed", n_failed},
                           {"results", per_subject}};
    write_file((fs::path(cfg.out_dir) / "match_summary.json").string(),
               summary.dump(2) + "\n");
    outputs.push_back("match_summary.json");
    write_manifest(cfg, "match", outputs, timer.seconds(), timings);
    return summary;
}

struct LoadedMomenta {
    MomentaMatrix data;
    Points mean_control;
};

LoadedMomenta load_momenta(const PipelineConfig& cfg) {
    const nlohmann::json summary = read_json(
        (fs::path(cfg.out_dir) / "match_summary.json").string());
    LoadedMomenta out;
    bool first = true;
    for (const auto& entry : summary.at("results")) {
        if (entry.at("failed").get<bool>()) continue;
        const nlohmann::json j = read_json(
            (fs::path(cfg.out_dir) / entry.at("file").get<std::string>())
                .string());
        const MatchResult r = match_result_from_json(j);
        const VectorXd row = momenta_to_vector(r.momenta);
        if (first) {
            out.data.rows.resize(0, row.size());
            out.mean_control = Points::Zero(r.control_points.rows(), 2);
            first = false;
        }
        require(row.size() == out.data.rows.cols(),
                "fpca: control grids differ across subjects");
        out.data.rows.conservativeResize(out.data.rows.rows() + 1,
                                         Eigen::NoChange);
        out.data.rows.row(out.data.rows.rows() - 1) = row.transpose();
        out.data.subject_ids.push_back(
            entry.at("subject_id").get<std::string>());
        out.mean_control += r.control_points;
        if (out.data.grid.rows() == 0) {
            out.data.grid = r.control_points;
        } else {
            require((out.data.grid.col(0) - r.control_points.col(0))
                            .cwiseAbs()
                            .maxCoeff() < 1e-9,
                    "fpca: control time grids differ across subjects");
        }
    }
    require(out.data.rows.rows() >= 2, "fpca: fewer than 2 matched subjects");
    out.mean_control /= static_cast<double>(out.data.rows.rows());
    out.data.grid = out.mean_control;
    return out;
}

Curve mean_baseline_curve(const CurveMap& curves) {
    Points acc;
    int count = 0;
    for (const auto& [id, visits] : curves) {
        if (!visits[0].has_value()) continue;
        if (count == 0) {
            acc = visits[0]->pts;
        } else {
            require(acc.rows() == visits[0]->size(),
                    "fpca: baseline grids differ across subjects");
            acc += visits[0]->pts;
        }
        ++count;
    }
    require(count > 0, "fpca: no baseline curves");
    return Curve{acc / static_cast<double>(count)};
}

nlohmann::json run_fpca(PipelineConfig& cfg) {
    StageTimer timer;
    const CurveMap curves = read_curves_csv(
        (fs::path(cfg.out_dir) / "curves.csv").string());
    const Curve template_curve = mean_baseline_curve(curves);

    PCModel model;
    int n_pc_used = cfg.n_pc;
    if (cfg.fpca_method == "momenta") {
        const LoadedMomenta loaded = load_momenta(cfg);
        n_pc_used = std::min<int>(
            cfg.n_pc, std::min<int>(loaded.data.rows.rows() - 1,
                                    loaded.data.rows.cols()));
        model = fit_pca(loaded.data, n_pc_used);
    } else {
        std::vector<Curve> baselines, followups;
        std::vector<std::string> ids;
        for (const auto& [id, visits] : curves) {
            if (visits[0].has_value() && visits[1].has_value()) {
                baselines.push_back(*visits[0]);
                followups.push_back(*visits[1]);
                ids.push_back(id);
            }
        }
        n_pc_used = std::min<int>(
            cfg.n_pc, std::min<int>(static_cast<int>(baselines.size()) - 1,
                                    static_cast<int>(baselines[0].size())));
        model = synth::vertical_diff_pca(baselines, followups, n_pc_used);
        model.subject_ids = ids;
    }

    std::ostringstream scores;
    csv::write_row(scores, {"subject_id", "pc_index", "score"});
    for (Eigen::Index i = 0; i < model.scores.rows(); ++i) {
        for (int l = 0; l < model.n_pc(); ++l) {
            csv::write_row(scores,
                           {model.subject_ids[static_cast<std::size_t>(i)],
                            std::to_string(l + 1),
                            csv::format_full(model.scores(i, l))});
        }
    }
    write_file((fs::path(cfg.out_dir) / "scores.csv").string(), scores.str());

    nlohmann::json model_json{{"model", pc_model_to_json(model)},
                              {"method", cfg.fpca_method},
                              {"template", curve_to_json(template_curve)},
                              {"n_pc", n_pc_used}};
    const std::string scale_path =
        (fs::path(cfg.out_dir) / "scale_params.json").string();
    if (fs::exists(scale_path)) {
        model_json["scale_params"] = read_json(scale_path).at("scale_params");
    }
    write_file((fs::path(cfg.out_dir) / "pc_model.json").string(),
               model_json.dump(2) + "\n");

    std::vector<std::string> outputs{"scores.csv", "pc_model.json"};
    nlohmann::json summary{{"stage", "fpca"},
                           {"method", cfg.fpca_method},
                           {"n_pc", n_pc_used},
                           {"subjects", model.scores.rows()}};
    {
        std::vector<double> cum(model.cum_var_explained.data(),
                                model.cum_var_explained.data() +
                                    model.cum_var_explained.size());
        summary["cum_var_explained"] = cum;
    }

    if (!cfg.truth_json.empty()) {
        const nlohmann::json truth = read_json(cfg.truth_json);
        const auto& ts = truth.at("true_scores");
        MatrixXd true_scores(ts.size(), 3);
        for (std::size_t i = 0; i < ts.size(); ++i) {
            for (int l = 0; l < 3; ++l) {
                true_scores(static_cast<Eigen::Index>(i), l) =
                    ts[i][l].get<double>();
            }
        }
        const auto& tm = truth.at("true_modes");
        MatrixXd true_modes(3, tm[0].size());
        for (int l = 0; l < 3; ++l) {
            for (std::size_t c = 0; c < tm[l].size(); ++c) {
                true_modes(l, static_cast<Eigen::Index>(c)) =
                    tm[l][c].get<double>();
            }
        }
        // keep only the rows of subjects present in the model, in model order
        const auto all_ids =
            truth.at("subject_ids").get<std::vector<std::string>>();
        MatrixXd aligned(model.scores.rows(), 3);
        for (Eigen::Index i = 0; i < model.scores.rows(); ++i) {
            const auto it = std::find(all_ids.begin(), all_ids.end(),
                                      model.subject_ids[i]);
            require(it != all_ids.end(),
                    "fpca: subject missing from truth file: " +
                        model.subject_ids[i]);
            aligned.row(i) = true_scores.row(it - all_ids.begin());
        }
        const synth::RecoveryReport rec =
            synth::compare_recovery(aligned, true_modes, model);
        const nlohmann::json rec_json = synth::recovery_to_json(rec);
        write_file((fs::path(cfg.out_dir) / "recovery.json").string(),
                   rec_json.dump(2) + "\n");
        std::ostringstream rc;
        csv::write_row(rc, {"true_mode", "matched_pc", "score_corr",
                            "momenta_corr"});
        for (const auto& m : rec_json.at("modes")) {
            rc << m.at("true_mode") << ',' << m.at("matched_pc") << ','
               << csv::format_full(m.at("score_corr").get<double>()) << ','
               << csv::format_full(m.at("momenta_corr").get<double>()) << '\n';
        }
        write_file((fs::path(cfg.out_dir) / "recovery.csv").string(),
                   rc.str());
        outputs.push_back("recovery.json");
        outputs.push_back("recovery.csv");
        summary["recovery"] = rec_json;
    }

    write_manifest(cfg, "fpca", outputs, timer.seconds(), nullptr);
    return summary;
}

std::map<std::string, VectorXd> read_scores_csv(const std::string& path,
                                                int& n_pc) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_validation("scores csv: cannot open " + path);
    csv::Reader reader(in);
    std::vector<std::string> fields;
    require(reader.next(fields) &&
                fields == std::vector<std::string>{"subject_id", "pc_index",
                                                   "score"},
            "scores csv: header must be subject_id,pc_index,score");
    std::map<std::string, std::map<int, double>> raw;
    n_pc = 0;
    while (reader.next(fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue;
        require(fields.size() == 3, "scores csv: wrong field count");
        const int pc = std::stoi(fields[1]);
        raw[fields[0]][pc] = std::stod(fields[2]);
        n_pc = std::max(n_pc, pc);
    }
    std::map<std::string, VectorXd> out;
    for (const auto& [id, m] : raw) {
        VectorXd v(n_pc);
        for (int l = 1; l <= n_pc; ++l) v(l - 1) = m.at(l);
        out[id] = v;
    }
    return out;
}

nlohmann::json run_regress(PipelineConfig& cfg) {
    StageTimer timer;
    require(!cfg.response.empty(), "regress: regress.response is not set");
    require(!cfg.covariates_csv.empty(),
            "regress: io.covariates_csv is not set");
    const stats::CovariateTable table =
        stats::read_covariates_csv(cfg.covariates_csv);

    int n_pc = 0;
    const auto scores = read_scores_csv(
        (fs::path(cfg.out_dir) / "scores.csv").string(), n_pc);

    // inner join on subject id, sorted order
    std::vector<std::string> ids;
    std::vector<std::size_t> table_row;
    for (std::size_t i = 0; i < table.subject_ids.size(); ++i) {
        if (scores.count(table.subject_ids[i])) {
            ids.push_back(table.subject_ids[i]);
            table_row.push_back(i);
        }
    }
    require(ids.size() >= 3, "regress: fewer than 3 joined subjects");

    const bool pc_response = cfg.response.rfind("pc_score:", 0) == 0;
    stats::DesignMatrix dm;
    std::vector<std::string> notes;

    if (pc_response) {
        const int l = std::stoi(cfg.response.substr(9));
        require(l >= 1 && l <= n_pc,
                "regress: pc_score index out of range (have " +
                    std::to_string(n_pc) + " components)");
        stats::CovariateTable sub;
        sub.columns = table.columns;
        for (std::size_t i : table_row) {
            sub.subject_ids.push_back(table.subject_ids[i]);
            sub.cells.push_back(table.cells[i]);
        }
        const stats::BuiltDesign built = stats::build_design(sub);
        notes = built.notes;
        dm.X = built.X;
        dm.names = built.names;
        dm.y.resize(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) {
            dm.y(static_cast<Eigen::Index>(i)) = scores.at(ids[i])(l - 1);
        }
    } else {
        const auto col_it = std::find(table.columns.begin(),
                                      table.columns.end(), cfg.response);
        require(col_it != table.columns.end(),
                "regress: response column not found: " + cfg.response);
        const std::size_t rc = col_it - table.columns.begin();
        stats::CovariateTable sub;
        sub.columns = table.columns;
        for (std::size_t i : table_row) {
            sub.subject_ids.push_back(table.subject_ids[i]);
            sub.cells.push_back(table.cells[i]);
        }
        const stats::BuiltDesign built =
            stats::build_design(sub, {cfg.response});
        notes = built.notes;

        dm.y.resize(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const std::string& cell = sub.cells[i][rc];
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            require(end == cell.c_str() + cell.size() && !cell.empty(),
                    "regress: response must be numeric; bad value '" + cell +
                        "' for subject " + ids[i]);
            dm.y(static_cast<Eigen::Index>(i)) = v;
        }
        dm.X.resize(ids.size(), n_pc + built.X.cols());
        for (int l = 0; l < n_pc; ++l) {
            for (std::size_t i = 0; i < ids.size(); ++i) {
                dm.X(static_cast<Eigen::Index>(i), l) = scores.at(ids[i])(l);
            }
            dm.names.push_back("PC" + std::to_string(l + 1));
        }
        dm.X.rightCols(built.X.cols()) = built.X;
        dm.names.insert(dm.names.end(), built.names.begin(),
                        built.names.end());
    }

    // forced-in entries match design columns exactly or by dummy prefix
    std::vector<std::string> forced;
    for (const std::string& f : cfg.forced_in) {
        bool found = false;
        for (const std::string& name : dm.names) {
            if (name == f || name.rfind(f + "=", 0) == 0) {
                forced.push_back(name);
                found = true;
            }
        }
        require(found, "regress: forced_in column not found: " + f);
    }

    const stats::LassoFit lasso = stats::fit_lasso_cv(
        dm, cfg.folds, cfg.seed, cfg.one_se_rule, forced);

    // OLS refit on selected + forced-in columns
    std::vector<int> keep;
    for (int j : lasso.selected) keep.push_back(j);
    for (const std::string& f : forced) {
        const int j = static_cast<int>(
            std::find(dm.names.begin(), dm.names.end(), f) - dm.names.begin());
        if (std::find(keep.begin(), keep.end(), j) == keep.end()) {
            keep.push_back(j);
        }
    }
    std::sort(keep.begin(), keep.end());
    require(!keep.empty(), "regress: lasso selected no columns");
    stats::DesignMatrix refit;
    refit.y = dm.y;
    refit.X.resize(dm.X.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) {
        refit.X.col(static_cast<Eigen::Index>(j)) = dm.X.col(keep[j]);
        refit.names.push_back(dm.names[keep[j]]);
    }
    const stats::OlsFit ols = stats::fit_ols(refit);

    nlohmann::json lasso_json = stats::lasso_to_json(lasso);
    for (const std::string& note : notes) lasso_json["notes"].push_back(note);
    write_file((fs::path(cfg.out_dir) / "regress_lasso.json").string(),
               lasso_json.dump(2) + "\n");
    std::ostringstream ols_csv;
    stats::write_ols_csv(ols, ols_csv);
    write_file((fs::path(cfg.out_dir) / "regress_ols.csv").string(),
               ols_csv.str());
    write_file((fs::path(cfg.out_dir) / "regress_ols.json").string(),
               stats::ols_to_json(ols).dump(2) + "\n");
    std::vector<std::string> outputs{"regress_lasso.json", "regress_ols.csv",
                                     "regress_ols.json"};

    nlohmann::json summary{{"stage", "regress"},
                           {"response", cfg.response},
                           {"n", dm.y.size()},
                           {"selected", lasso_json["selected"]},
                           {"notes", lasso_json["notes"]}};

    if (cfg.functional) {
        require(!pc_response,
                "regress: functional regression needs a scalar response");
        const LoadedMomenta loaded = load_momenta(cfg);
        const Eigen::Index g = loaded.data.grid.rows();
        // align subjects between momenta and the joined design
        MatrixXd mx(ids.size(), g), my(ids.size(), g);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const auto it =
                std::find(loaded.data.subject_ids.begin(),
                          loaded.data.subject_ids.end(), ids[i]);
            require(it != loaded.data.subject_ids.end(),
                    "regress: no momenta for subject " + ids[i]);
            const Eigen::Index r = it - loaded.data.subject_ids.begin();
            mx.row(static_cast<Eigen::Index>(i)) =
                loaded.data.rows.row(r).head(g);
            my.row(static_cast<Eigen::Index>(i)) =
                loaded.data.rows.row(r).tail(g);
        }
        // covariates: the lasso-selected and forced-in scalar columns
        std::vector<int> zcols = keep;
        MatrixXd Z(ids.size(), static_cast<Eigen::Index>(zcols.size()));
        std::vector<std::string> z_names;
        for (std::size_t j = 0; j < zcols.size(); ++j) {
            Z.col(static_cast<Eigen::Index>(j)) = dm.X.col(zcols[j]);
            z_names.push_back(dm.names[zcols[j]]);
        }
        // grid in clock time
        VectorXd grid(g);
        const std::string scale_path =
            (fs::path(cfg.out_dir) / "scale_params.json").string();
        ScaleParams sp;
        if (fs::exists(scale_path)) {
            sp = scale_from_json(read_json(scale_path).at("scale_params"));
        }
        for (Eigen::Index i = 0; i < g; ++i) {
            grid(i) = x_to_time(loaded.data.grid(i, 0), sp);
        }
        const stats::FunctionalFit fr = stats::fit_functional_regression(
            mx, my, grid, Z, z_names, dm.y, cfg.n_basis);
        write_file((fs::path(cfg.out_dir) / "regress_functional.json").string(),
                   stats::functional_to_json(fr).dump(2) + "\n");
        std::ostringstream fcsv;
        stats::write_functional_csv(fr, fcsv);
        write_file((fs::path(cfg.out_dir) / "regress_functional.csv").string(),
                   fcsv.str());
        outputs.push_back("regress_functional.json");
        outputs.push_back("regress_functional.csv");
        summary["functional"] = {{"lambda_x", fr.lambda_x},
                                 {"lambda_y", fr.lambda_y},
                                 {"edf", fr.edf}};
    }

    write_manifest(cfg, "regress", outputs, timer.seconds(), nullptr);
    return summary;
}

nlohmann::json run_simulate(PipelineConfig& cfg) {
    StageTimer timer;
    synth::SynthConfig sim = cfg.sim;
    if (!cfg.recipes_json.empty()) {
        sim.recipes = synth::recipes_from_json(read_json(cfg.recipes_json));
    }
    const synth::SynthCohort cohort = synth::simulate_cohort(sim);

    fs::create_directories(cfg.out_dir);
    std::ostringstream csv_out;
    synth::write_cohort_csv(cohort, csv_out);
    write_file((fs::path(cfg.out_dir) / "cohort.csv").string(), csv_out.str());
    write_file((fs::path(cfg.out_dir) / "truth.json").string(),
               synth::truth_to_json(cohort).dump(2) + "\n");

    write_manifest(cfg, "simulate", {"cohort.csv", "truth.json"},
                   timer.seconds(), nullptr);
    return {{"stage", "simulate"},
            {"subjects", cohort.subject_ids.size()},
            {"complete", cohort.n_complete},
            {"grid_points", cohort.grid_minutes.size()},
            {"cohort_csv",
             (fs::path(cfg.out_dir) / "cohort.csv").string()}};
}

nlohmann::json run_render(PipelineConfig& cfg) {
    StageTimer timer;
    svg::FigureOptions opts;
    opts.width = cfg.fig_width;
    opts.height = cfg.fig_height;
    opts.arrow_stride = cfg.arrow_stride;
    opts.arrow_scale = cfg.arrow_scale;

    const std::string scale_path =
        cfg.render_scale_json.empty()
            ? (fs::path(cfg.out_dir) / "scale_params.json").string()
            : cfg.render_scale_json;
    ScaleParams sp;
    if (fs::exists(scale_path)) {
        sp = scale_from_json(read_json(scale_path).at("scale_params"));
    }

    std::vector<std::string> outputs;
    nlohmann::json summary{{"stage", "render"}, {"kind", cfg.render_kind}};
    if (cfg.render_kind == "match") {
        const std::string curves_path =
            cfg.render_curves_csv.empty()
                ? (fs::path(cfg.out_dir) / "curves.csv").string()
                : cfg.render_curves_csv;
        const CurveMap curves = read_curves_csv(curves_path);
        std::string subject = cfg.render_subject;
        std::string match_path = cfg.render_match_json;
        if (subject.empty()) {
            for (const auto& [id, visits] : curves) {
                if (visits[0].has_value() && visits[1].has_value()) {
                    subject = id;
                    break;
                }
            }
        }
        require(!subject.empty(), "render: no matched subject available");
        if (match_path.empty()) {
            match_path = (fs::path(cfg.out_dir) / "match" /
                          (sanitize_id(subject) + ".json"))
                             .string();
        }
        const nlohmann::json mj = read_json(match_path);
        const MatchResult r = match_result_from_json(mj);
        const MatchConfig mc = match_config_from_json(mj.at("config"));
        const auto& visits = curves.at(subject);
        require(visits[0].has_value() && visits[1].has_value(),
                "render: subject lacks both visits: " + subject);
        const Curve deformed = deformed_source(r, *visits[0], mc);
        opts.title = "estimated deformation, subject " + subject;
        const std::string svg_text = svg::render_match_figure(
            *visits[0], *visits[1], deformed, r.control_points, r.momenta, sp,
            opts);
        const std::string rel = "render_match_" + sanitize_id(subject) + ".svg";
        write_file((fs::path(cfg.out_dir) / rel).string(), svg_text);
        outputs.push_back(rel);
        summary["subject"] = subject;
    } else {
        const std::string model_path =
            cfg.render_pc_model.empty()
                ? (fs::path(cfg.out_dir) / "pc_model.json").string()
                : cfg.render_pc_model;
        const nlohmann::json mj = read_json(model_path);
        const PCModel model = pc_model_from_json(mj.at("model"));
        const Curve template_curve = curve_from_json(mj.at("template"));
        const int l = cfg.pc_index - 1;
        require(l >= 0 && l < model.n_pc(), "render: pc_index out of range");

        std::vector<std::pair<double, Curve>> flows;
        Points control(0, 2), arrows(0, 2);
        if (mj.at("method").get<std::string>() == "momenta") {
            const MatchConfig mc;  // defaults; only flow params matter here
            const std::vector<Curve> curves = pc_flow_curves(
                model, l, template_curve, cfg.multipliers, mc.n_steps,
                mc.sigma_v);
            for (std::size_t i = 0; i < curves.size(); ++i) {
                flows.emplace_back(cfg.multipliers[i], curves[i]);
            }
            control = template_curve.pts;
            arrows = momenta_from_vector(
                model.mean + model.components.row(l).transpose());
        } else {
            // vertical-difference model: overlays add the component to the
            // template magnitudes
            for (double c : cfg.multipliers) {
                Points pts = template_curve.pts;
                pts.col(1) += model.mean + c * model.components.row(l).transpose();
                flows.emplace_back(c, Curve{std::move(pts)});
            }
        }
        opts.title = "PC " + std::to_string(cfg.pc_index);
        const std::string svg_text = svg::render_pc_figure(
            template_curve, flows, control, arrows, sp, opts);
        const std::string rel =
            "render_pc_" + std::to_string(cfg.pc_index) + ".svg";
        write_file((fs::path(cfg.out_dir) / rel).string(), svg_text);
        outputs.push_back(rel);
        summary["pc_index"] = cfg.pc_index;
    }

    write_manifest(cfg, "render", outputs, timer.seconds(), nullptr);
    return summary;
}

}  // namespace

nlohmann::json PipelineConfig::echo() const {
    return {
        {"io",
         {{"input_csv", input_csv},
          {"covariates_csv", covariates_csv},
          {"out_dir", out_dir}}},
        {"preprocess",
         {{"window_start_min", preprocess.window_start_min},
          {"window_end_min", preprocess.window_end_min},
          {"epoch_minutes", preprocess.epoch_minutes},
          {"target_df", preprocess.target_df},
          {"scale_params_json", scale_params_json}}},
        {"match", match_config_to_json(match)},
        {"fpca",
         {{"n_pc", n_pc}, {"method", fpca_method}, {"truth_json", truth_json}}},
        {"regress",
         {{"response", response},
          {"forced_in", forced_in},
          {"folds", folds},
          {"one_se_rule", one_se_rule},
          {"functional", functional},
          {"n_basis", n_basis}}},
        {"simulate",
         {{"n_subjects", sim.n_subjects},
          {"incomplete_subjects", sim.incomplete_subjects},
          {"rng_seed", sim.rng_seed},
          {"amplitude", sim.amplitude},
          {"scale_base", sim.scale_base},
          {"window_start_min", sim.window_start_min},
          {"window_end_min", sim.window_end_min},
          {"epoch_minutes", sim.epoch_minutes},
          {"sigma_v", sim.sigma_v},
          {"n_steps", sim.n_steps},
          {"recipes_json", recipes_json}}},
        {"render",
         {{"kind", render_kind},
          {"subject", render_subject},
          {"match_json", render_match_json},
          {"pc_model_json", render_pc_model},
          {"curves_csv", render_curves_csv},
          {"scale_json", render_scale_json},
          {"pc_index", pc_index},
          {"arrow_stride", arrow_stride},
          {"arrow_scale", arrow_scale},
          {"multipliers", multipliers},
          {"width", fig_width},
          {"height", fig_height}}},
        {"run", {{"jobs", jobs}, {"seed", seed}}}};
}

PipelineConfig parse_config(std::istream& in, const std::string& origin) {
    const IniData data = parse_ini(in, origin);
    PipelineConfig cfg;
    bool seed_set = false;
    for (const auto& [section, kv] : data) {
        for (const auto& [key, value] : kv) {
            set_key(cfg, section, key, value);
            if (section == "run" && key == "seed") seed_set = true;
        }
    }
    // simulate shares the run seed unless pinned explicitly
    if (seed_set && !data.count("simulate")) {
        cfg.sim.rng_seed = cfg.seed;
    } else if (seed_set && data.count("simulate") &&
               !data.at("simulate").count("rng_seed")) {
        cfg.sim.rng_seed = cfg.seed;
    }
    require(cfg.jobs >= 1, "config: run.jobs must be >= 1");
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_validation("config: cannot open " + path);
    return parse_config(in, path);
}

void apply_override(PipelineConfig& cfg, const std::string& key,
                    const std::string& value) {
    const auto dot = key.find('.');
    require(dot != std::string::npos,
            "override key must look like section.key: " + key);
    set_key(cfg, key.substr(0, dot), key.substr(dot + 1), value);
    if (key == "run.seed") cfg.sim.rng_seed = cfg.seed;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_runtime("hash_file: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                  static_cast<unsigned long long>(fnv1a64(ss.str())));
    return buf;
}

nlohmann::json run_stage(PipelineConfig& cfg, const std::string& stage) {
    if (stage == "preprocess") return run_preprocess(cfg);
    if (stage == "match") return run_match(cfg);
    if (stage == "fpca") return run_fpca(cfg);
    if (stage == "regress") return run_regress(cfg);
    if (stage == "simulate") return run_simulate(cfg);
    if (stage == "render") return run_render(cfg);
    if (stage == "all") {
        nlohmann::json all = nlohmann::json::array();
        if (cfg.simulate_section) {
            all.push_back(run_simulate(cfg));
            if (cfg.input_csv.empty()) {
                cfg.input_csv =
                    (fs::path(cfg.out_dir) / "cohort.csv").string();
            }
            if (cfg.truth_json.empty()) {
                cfg.truth_json =
                    (fs::path(cfg.out_dir) / "truth.json").string();
            }
        }
        all.push_back(run_preprocess(cfg));
        all.push_back(run_match(cfg));
        all.push_back(run_fpca(cfg));
        if (!cfg.response.empty()) all.push_back(run_regress(cfg));
        all.push_back(run_render(cfg));
        return {{"stage", "all"}, {"stages", all}};
    }
    fail_validation("unknown stage: " + stage +
                    " (expected preprocess, match, fpca, regress, simulate, "
                    "render or all)");
}

}  // namespace actigeo::pipeline
