#include "ingest.hpp"

#include "csv.hpp"
#include "spline.hpp"

#include <cmath>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace actigeo::ingest {

namespace {

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
    fail_validation("activity csv, line " + std::to_string(line) + ": " + what);
}

bool parse_int(const std::string& s, int& out) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    const auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc() && res.ptr == end;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

}  // namespace

void PreprocessConfig::validate() const {
    require(window_start_min >= 0 && window_start_min < window_end_min &&
                window_end_min <= 1440,
            "preprocess: window must satisfy 0 <= start < end <= 1440");
    require(epoch_minutes >= 1, "preprocess: epoch_minutes must be >= 1");
    require(n_grid() >= 4, "preprocess: window holds fewer than 4 epochs");
    require(target_df > 1.0 && target_df < n_grid(),
            "preprocess: target_df must lie in (1, number of grid points)");
}

std::vector<double> PreprocessConfig::grid_minutes() const {
    std::vector<double> grid;
    for (int t = window_start_min; t < window_end_min; t += epoch_minutes) {
        grid.push_back(static_cast<double>(t));
    }
    return grid;
}

CohortRecords parse_activity_csv(std::istream& in,
                                 const PreprocessConfig& cfg) {
    cfg.validate();
    csv::Reader reader(in);
    std::vector<std::string> fields;

    require(reader.next(fields),
            "activity csv: empty input, expected header "
            "subject_id,visit,day_index,minute_of_day,vm");
    const std::vector<std::string> expected = {
        "subject_id", "visit", "day_index", "minute_of_day", "vm"};
    if (fields != expected) {
        fail_validation(
            "activity csv: header must be subject_id,visit,day_index,"
            "minute_of_day,vm");
    }

    CohortRecords cohort;
    std::map<std::string, std::array<std::set<int>, 2>> days_seen;
    while (reader.next(fields)) {
        const std::size_t line = reader.record_line();
        if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
        if (fields.size() != 5) parse_fail(line, "expected 5 fields");

        const std::string& subject = fields[0];
        if (subject.empty()) parse_fail(line, "empty subject_id");

        int visit = 0, day = 0, minute = 0;
        double vm = 0.0;
        if (!parse_int(fields[1], visit) || (visit != 0 && visit != 1)) {
            parse_fail(line, "visit must be 0 or 1");
        }
        if (!parse_int(fields[2], day) || day < 0) {
            parse_fail(line, "day_index must be a nonnegative integer");
        }
        if (!parse_int(fields[3], minute) || minute < 0 || minute > 1439) {
            parse_fail(line, "minute_of_day must be an integer in [0, 1439]");
        }
        if (!parse_double(fields[4], vm) || !std::isfinite(vm)) {
            parse_fail(line, "vm must be a finite number");
        }
        if (vm < 0.0) parse_fail(line, "negative vm");

        if (minute < cfg.window_start_min || minute >= cfg.window_end_min) {
            continue;
        }
        if ((minute - cfg.window_start_min) % cfg.epoch_minutes != 0) {
            parse_fail(line, "minute_of_day " + std::to_string(minute) +
                                 " is not on the configured epoch grid");
        }

        auto& slot = cohort.groups[subject][visit];
        if (!slot.has_value()) {
            slot.emplace();
            slot->subject_id = subject;
            slot->visit = visit;
        }
        const auto [it, inserted] = slot->rows.emplace(
            std::make_pair(day, minute), vm);
        if (!inserted) {
            std::ostringstream msg;
            msg << "duplicate key (" << subject << ", visit " << visit
                << ", day " << day << ", minute " << minute << ")";
            parse_fail(line, msg.str());
        }
        days_seen[subject][visit].insert(day);
    }

    for (auto& [subject, visits] : cohort.groups) {
        for (int v = 0; v < 2; ++v) {
            if (visits[v].has_value()) {
                visits[v]->n_days =
                    static_cast<int>(days_seen[subject][v].size());
            }
        }
        const bool complete = visits[0].has_value() && visits[1].has_value();
        (complete ? cohort.complete : cohort.incomplete).push_back(subject);
    }
    return cohort;
}

CohortRecords parse_activity_csv(const std::string& path,
                                 const PreprocessConfig& cfg) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_validation("activity csv: cannot open " + path);
    return parse_activity_csv(in, cfg);
}

MinuteSeries average_days(const RawRecords& records,
                          const PreprocessConfig& cfg) {
    require(records.n_days >= 1, "average_days: no days present");
    MinuteSeries out;
    out.minutes = cfg.grid_minutes();
    out.values = VectorXd::Zero(static_cast<Eigen::Index>(out.minutes.size()));
    // absent minutes contribute zero, so the mean is the sum over present
    // records divided by the day count
    for (const auto& [key, vm] : records.rows) {
        const int idx = (key.second - cfg.window_start_min) / cfg.epoch_minutes;
        out.values(idx) += vm;
    }
    out.values /= static_cast<double>(records.n_days);
    return out;
}

SmoothedSeries smooth_series(const MinuteSeries& series, double target_df) {
    Eigen::Map<const VectorXd> x(series.minutes.data(),
                                 static_cast<Eigen::Index>(series.minutes.size()));
    const SplineFit fit = smooth_spline(x, series.values, target_df);
    SmoothedSeries out;
    out.series.minutes = series.minutes;
    out.series.values = fit.fitted;
    out.achieved_df = fit.df;
    out.lambda = fit.lambda;
    return out;
}

Curve normalize_curve(const MinuteSeries& series, const ScaleParams& scale) {
    scale.validate();
    const Eigen::Index n = series.values.size();
    require(static_cast<Eigen::Index>(series.minutes.size()) == n,
            "normalize_curve: grid and value sizes differ");
    Points pts(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        pts(i, 0) = time_to_x(series.minutes[static_cast<std::size_t>(i)], scale);
        pts(i, 1) = mag_to_y(series.values(i), scale);
    }
    return make_curve(std::move(pts));
}

}  // namespace actigeo::ingest
