#pragma once

#include "curve.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace actigeo::ingest {

struct PreprocessConfig {
    int window_start_min = 360;  // 6am
    int window_end_min = 1440;   // midnight (exclusive)
    int epoch_minutes = 1;
    double target_df = 25.0;

    void validate() const;
    int n_grid() const {
        return (window_end_min - window_start_min + epoch_minutes - 1) /
               epoch_minutes;
    }
    std::vector<double> grid_minutes() const;
};

// Window-filtered raw rows for one subject-visit.
struct RawRecords {
    std::string subject_id;
    int visit = 0;
    // (day_index, minute_of_day) -> vm; keys unique by construction
    std::map<std::pair<int, int>, double> rows;
    int n_days = 0;
};

struct CohortRecords {
    // subject -> [baseline, follow-up]
    std::map<std::string, std::array<std::optional<RawRecords>, 2>> groups;
    std::vector<std::string> complete;    // rows present in both visits
    std::vector<std::string> incomplete;  // flagged, dropped downstream
};

// Parses the raw activity contract
// `subject_id,visit,day_index,minute_of_day,vm`; rows outside
// [window_start, window_end) are dropped, malformed rows and duplicate keys
// are reported with their line number.
CohortRecords parse_activity_csv(std::istream& in,
                                 const PreprocessConfig& cfg);
CohortRecords parse_activity_csv(const std::string& path,
                                 const PreprocessConfig& cfg);

struct MinuteSeries {
    std::vector<double> minutes;
    VectorXd values;
};

// Mean over days at each grid epoch; minutes absent from a day count as zero
// (non-wear treated as inactive time).
MinuteSeries average_days(const RawRecords& records,
                          const PreprocessConfig& cfg);

struct SmoothedSeries {
    MinuteSeries series;
    double achieved_df = 0.0;
    double lambda = 0.0;
};

SmoothedSeries smooth_series(const MinuteSeries& series, double target_df);

Curve normalize_curve(const MinuteSeries& series, const ScaleParams& scale);

}  // namespace actigeo::ingest
